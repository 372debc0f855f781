"""Polynomials in (z, zbar) with exact derivatives.

A :class:`PolyField` stores a finite sum

    sum  c[alpha, beta] * z**alpha * zbar**beta

over multi-indices ``alpha, beta`` of length ``n``.  All user supplied
fields (defining functions, weights, entries of the structure matrix)
live in this class, so every derivative used downstream is exact.

Points are complex arrays of shape ``(..., n)``.  Real coordinates use the
block ordering ``(x_1, ..., x_n, y_1, ..., y_n)``.
"""
from __future__ import annotations

import math
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

Monomial = Tuple[Tuple[int, ...], Tuple[int, ...]]

REAL_SYMMETRY_TOL = 1e-13


def to_real(z):
    """(..., n) complex -> (..., 2n) real, block ordering."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def to_complex(x):
    """(..., 2n) real -> (..., n) complex."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


class PolyField:
    """Polynomial in ``z`` and ``zbar`` with complex coefficients.

    Parameters
    ----------
    n : int
        Number of complex variables.
    terms : mapping
        ``{(alpha, beta): coefficient}``.  Zero coefficients are dropped.
    real : bool
        Declare the field real valued.  The coefficients must then satisfy
        ``c[alpha, beta] == conj(c[beta, alpha])``; this is checked.
    """

    __slots__ = ("n", "terms", "real", "_deriv_cache")

    def __init__(self, n: int, terms: Mapping | None = None, real: bool = False):
        self.n = int(n)
        clean: Dict[Monomial, complex] = {}
        for (alpha, beta), c in (terms or {}).items():
            alpha, beta = tuple(int(a) for a in alpha), tuple(int(b) for b in beta)
            if len(alpha) != self.n or len(beta) != self.n:
                raise ValueError(f"multi-index length must be {self.n}")
            if min(alpha + beta, default=0) < 0:
                raise ValueError("negative exponent")
            c = complex(c)
            if c != 0:
                key = (alpha, beta)
                clean[key] = clean.get(key, 0j) + c
        self.terms = {k: v for k, v in clean.items() if v != 0}
        self.real = bool(real)
        self._deriv_cache = {}
        if self.real:
            self._check_real()

    # -- construction helpers ------------------------------------------------
    @classmethod
    def constant(cls, n, c, real=None):
        zero = (0,) * n
        if real is None:
            real = complex(c).imag == 0
        return cls(n, {(zero, zero): c}, real=real)

    @classmethod
    def z(cls, n, k):
        e = tuple(int(i == k) for i in range(n))
        return cls(n, {(e, (0,) * n): 1.0})

    @classmethod
    def zbar(cls, n, k):
        e = tuple(int(i == k) for i in range(n))
        return cls(n, {((0,) * n, e): 1.0})

    @classmethod
    def norm_squared(cls, n):
        """``|z|^2 = sum_k z_k zbar_k``."""
        terms = {}
        for k in range(n):
            e = tuple(int(i == k) for i in range(n))
            terms[(e, e)] = 1.0
        return cls(n, terms, real=True)

    def _check_real(self):
        scale = max((abs(c) for c in self.terms.values()), default=0.0)
        for (alpha, beta), c in self.terms.items():
            partner = self.terms.get((beta, alpha), 0j)
            if abs(c - np.conj(partner)) > REAL_SYMMETRY_TOL * max(scale, 1.0):
                raise ValueError(
                    f"coefficients not conjugate symmetric at {alpha},{beta}; "
                    "field is not real valued"
                )

    # -- algebra ------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, PolyField):
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            return other
        return PolyField.constant(self.n, other)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0j) + v
        return PolyField(self.n, terms, real=self.real and other.real)

    __radd__ = __add__

    def __neg__(self):
        return PolyField(self.n, {k: -v for k, v in self.terms.items()}, real=self.real)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        return self.multiply(other)

    __rmul__ = __mul__

    def multiply(self, other, degree: int | None = None):
        """Product, optionally truncated to total degree ``<= degree``."""
        other = self._coerce(other)
        out: Dict[Monomial, complex] = {}
        for (a1, b1), c1 in self.terms.items():
            d1 = sum(a1) + sum(b1)
            for (a2, b2), c2 in other.terms.items():
                if degree is not None and d1 + sum(a2) + sum(b2) > degree:
                    continue
                key = (
                    tuple(x + y for x, y in zip(a1, a2)),
                    tuple(x + y for x, y in zip(b1, b2)),
                )
                out[key] = out.get(key, 0j) + c1 * c2
        return PolyField(self.n, out, real=self.real and other.real and _sym(out))

    def __pow__(self, k: int):
        result = PolyField.constant(self.n, 1.0)
        for _ in range(int(k)):
            result = result * self
        return result

    def conj(self):
        """Complex conjugate field ``conj(f(z))``."""
        return PolyField(
            self.n, {(b, a): np.conj(c) for (a, b), c in self.terms.items()}, real=self.real
        )

    def real_part(self):
        return PolyField(self.n, (0.5 * (self + self.conj())).terms, real=True)

    def truncate(self, degree: int):
        return PolyField(
            self.n,
            {k: v for k, v in self.terms.items() if sum(k[0]) + sum(k[1]) <= degree},
            real=self.real,
        )

    def homogeneous_part(self, degree: int):
        return PolyField(
            self.n,
            {k: v for k, v in self.terms.items() if sum(k[0]) + sum(k[1]) == degree},
            real=self.real,
        )

    @property
    def degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, alpha, beta) -> complex:
        return self.terms.get((tuple(alpha), tuple(beta)), 0j)

    def scale_argument(self, lam: float):
        """Return ``w -> f(lam * w)``."""
        return PolyField(
            self.n,
            {(a, b): c * lam ** (sum(a) + sum(b)) for (a, b), c in self.terms.items()},
            real=self.real,
        )

    def compose(self, maps, degree: int | None = None):
        """Substitute ``z_k -> maps[k]`` and ``zbar_k -> conj(maps[k])``.

        ``maps`` is a sequence of ``n`` PolyFields in some common dimension ``m``.
        """
        maps = list(maps)
        if len(maps) != self.n:
            raise ValueError("need one map per variable")
        m = maps[0].n
        conj_maps = [g.conj() for g in maps]
        powers: Dict[tuple, PolyField] = {}

        def power(which, k, e):
            key = (which, k, e)
            if key not in powers:
                if e == 0:
                    powers[key] = PolyField.constant(m, 1.0)
                else:
                    base = maps[k] if which == 0 else conj_maps[k]
                    powers[key] = power(which, k, e - 1).multiply(base, degree)
            return powers[key]

        total = PolyField(m, {})
        for (alpha, beta), c in self.terms.items():
            term = PolyField.constant(m, c)
            for k, e in enumerate(alpha):
                if e:
                    term = term.multiply(power(0, k, e), degree)
            for k, e in enumerate(beta):
                if e:
                    term = term.multiply(power(1, k, e), degree)
            total = total + term
        return PolyField(m, total.terms, real=self.real and _sym(total.terms))

    # -- calculus -------------------------------------------------------------
    def dz(self, k: int):
        key = ("z", k)
        if key not in self._deriv_cache:
            out = {}
            for (a, b), c in self.terms.items():
                if a[k]:
                    a2 = a[:k] + (a[k] - 1,) + a[k + 1:]
                    out[(a2, b)] = c * a[k]
            self._deriv_cache[key] = PolyField(self.n, out)
        return self._deriv_cache[key]

    def dzbar(self, k: int):
        key = ("zbar", k)
        if key not in self._deriv_cache:
            out = {}
            for (a, b), c in self.terms.items():
                if b[k]:
                    b2 = b[:k] + (b[k] - 1,) + b[k + 1:]
                    out[(a, b2)] = c * b[k]
            self._deriv_cache[key] = PolyField(self.n, out)
        return self._deriv_cache[key]

    def dx(self, k: int):
        return self.dz(k) + self.dzbar(k)

    def dy(self, k: int):
        return 1j * (self.dz(k) - self.dzbar(k))

    def real_derivative(self, i: int):
        """Derivative along real coordinate ``i`` (block ordering)."""
        key = ("real", i)
        if key not in self._deriv_cache:
            d = self.dx(i) if i < self.n else self.dy(i - self.n)
            if self.real:
                d = PolyField(self.n, d.terms, real=_sym(d.terms))
            self._deriv_cache[key] = d
        return self._deriv_cache[key]

    # -- evaluation -----------------------------------------------------------
    def __call__(self, z):
        return self.evaluate(z)

    def evaluate(self, z):
        """Evaluate at complex points ``z`` of shape ``(..., n)``."""
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.n:
            raise ValueError(f"points must have trailing dimension {self.n}")
        out = np.zeros(z.shape[:-1], dtype=complex)
        if not self.terms:
            return out.real if self.real else out
        zb = np.conj(z)
        zpow, zbpow = {}, {}

        def pw(cache, base, k, e):
            if (k, e) not in cache:
                cache[(k, e)] = base[..., k] ** e
            return cache[(k, e)]

        for (alpha, beta), c in self.terms.items():
            term = np.full(z.shape[:-1], c, dtype=complex)
            for k, e in enumerate(alpha):
                if e:
                    term = term * pw(zpow, z, k, e)
            for k, e in enumerate(beta):
                if e:
                    term = term * pw(zbpow, zb, k, e)
            out += term
        return out.real if self.real else out

    def evaluate_real(self, x):
        """Evaluate at real points of shape ``(..., 2n)``."""
        return self.evaluate(to_complex(x))

    def gradient(self, x):
        """Real gradient at real points ``x`` (shape ``(..., 2n)``)."""
        z = to_complex(x)
        parts = [self.real_derivative(i).evaluate(z) for i in range(2 * self.n)]
        return np.stack(parts, axis=-1)

    def hessian(self, x):
        """Real Hessian at real points, shape ``(..., 2n, 2n)``."""
        z = to_complex(x)
        m = 2 * self.n
        rows = []
        for i in range(m):
            di = self.real_derivative(i)
            rows.append([di.real_derivative(j).evaluate(z) for j in range(m)])
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    def sup_bound(self, radius: float) -> float:
        """Coefficient bound ``sum |c| R**deg`` for ``sup_{|z|<=R} |f|``."""
        return float(
            sum(abs(c) * radius ** (sum(a) + sum(b)) for (a, b), c in self.terms.items())
        )

    def derivative_bound(self, radius: float) -> float:
        """Coefficient bound for the sup of the full real differential."""
        return float(
            sum(
                abs(c) * (sum(a) + sum(b)) * radius ** max(sum(a) + sum(b) - 1, 0)
                for (a, b), c in self.terms.items()
            )
        )

    # -- serialization ----------------------------------------------------------
    def to_records(self):
        return [
            {"z": list(a), "zbar": list(b), "re": float(c.real), "im": float(c.imag)}
            for (a, b), c in sorted(self.terms.items())
        ]

    def to_dict(self):
        return {"n": self.n, "real": self.real, "terms": self.to_records()}

    @classmethod
    def from_records(cls, n: int, records: Iterable[Mapping], real: bool = False):
        terms = {}
        for rec in records:
            key = (tuple(rec["z"]), tuple(rec["zbar"]))
            terms[key] = terms.get(key, 0j) + complex(rec.get("re", 0.0), rec.get("im", 0.0))
        return cls(n, terms, real=real)

    @classmethod
    def from_dict(cls, d: Mapping):
        return cls.from_records(d["n"], d["terms"], real=d.get("real", False))

    def __eq__(self, other):
        if not isinstance(other, PolyField):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, tuple(sorted(self.terms.items(), key=lambda kv: kv[0]))))

    def allclose(self, other, atol=1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0j) - other.terms.get(k, 0j)) <= atol for k in keys)

    def __repr__(self):
        kind = "real" if self.real else "complex"
        return f"PolyField(n={self.n}, {kind}, {len(self.terms)} terms, degree={self.degree})"


def _sym(terms) -> bool:
    scale = max((abs(c) for c in terms.values()), default=0.0)
    tol = REAL_SYMMETRY_TOL * max(scale, 1.0)
    return all(abs(c - np.conj(terms.get((b, a), 0j))) <= tol for (a, b), c in terms.items())


def monomial(n, alpha, beta, c=1.0) -> PolyField:
    return PolyField(n, {(tuple(alpha), tuple(beta)): c})


def real_monomial_pair(n, alpha, beta, c=1.0) -> PolyField:
    """``2 Re(c z^alpha zbar^beta)`` as a real field."""
    f = monomial(n, alpha, beta, c)
    return PolyField(n, (f + f.conj()).terms, real=True)


def n_monomials(nvars: int, degree: int) -> int:
    return math.comb(nvars + degree, degree)
