"""Almost complex structures on a chart, encoded by the matrix ``Q``.

A structure ``J`` on a ball in ``C^n`` is stored through the complex
``n x n`` matrix ``Q(z)`` of its anti-linear deviation from ``J_st``: the
real endomorphism ``u(v) = Q v̄`` and

    J = J_st (I + u) (I - u)^{-1},

so that ``J``-holomorphic discs solve ``z_ζ̄ + Q(z) z̄_ζ̄ = 0``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .errors import NonInvertible, NotCentered, OutOfChart, StructureInvalid
from .polyfield import PolyField, to_complex, to_real

ROUNDTRIP_TOL = 1e-10


def j_standard(n: int) -> np.ndarray:
    """``J_st`` in block coordinates: ``J e_x = e_y``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def u_from_q(Q):
    """Real ``2n x 2n`` matrix of ``v -> Q v̄`` (batched over leading axes)."""
    Q = np.asarray(Q, dtype=complex)
    P, R = Q.real, Q.imag
    top = np.concatenate([P, R], axis=-1)
    bottom = np.concatenate([R, -P], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def q_from_u(U):
    U = np.asarray(U, dtype=float)
    n = U.shape[-1] // 2
    return U[..., :n, :n] + 1j * U[..., :n, n:]


def j_matrix(Q):
    """``J = J_st (I+U)(I-U)^{-1}`` for a batch of ``Q`` matrices."""
    Q = np.asarray(Q, dtype=complex)
    n = Q.shape[-1]
    U = u_from_q(Q)
    eye = np.eye(2 * n)
    opnorm = np.linalg.norm(Q, ord=2, axis=(-2, -1)) if Q.ndim > 2 else np.linalg.norm(Q, 2)
    if np.any(np.asarray(opnorm) >= 1.0):
        raise NonInvertible("operator norm of Q is >= 1; structure undefined here")
    A = np.swapaxes(eye - U, -1, -2)
    B = np.swapaxes(eye + U, -1, -2)
    M = np.swapaxes(np.linalg.solve(A, B), -1, -2)
    return j_standard(n) @ M


def q_from_j(J, Jst=None):
    """Recover ``Q`` from a real structure matrix ``J`` (``J^2 = -I``)."""
    J = np.asarray(J, dtype=float)
    n = J.shape[-1] // 2
    Jst = j_standard(n) if Jst is None else np.asarray(Jst, dtype=float)
    S = Jst + J
    try:
        U = -np.linalg.solve(S, Jst - J)
    except np.linalg.LinAlgError as exc:
        raise NonInvertible("J_st + J is singular") from exc
    if not np.all(np.isfinite(U)) or np.any(np.linalg.cond(S) > 1e14):
        raise NonInvertible("J_st + J is singular")
    return q_from_u(U)


def antilinearity_residual(J, Jst=None) -> float:
    """``|| u J_st + J_st u ||`` for ``u = -(J_st+J)^{-1}(J_st-J)``."""
    J = np.asarray(J, dtype=float)
    n = J.shape[-1] // 2
    Jst = j_standard(n) if Jst is None else Jst
    U = -np.linalg.solve(Jst + J, Jst - J)
    return float(np.max(np.abs(U @ Jst + Jst @ U)))


@dataclass(frozen=True)
class StructureField:
    """Polynomial structure matrix ``Q`` on the ball ``|z| <= radius``."""

    n: int
    Q: tuple  # n x n nested tuple of PolyField
    radius: float = 1.0

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.Q)
        if len(rows) != self.n or any(len(r) != self.n for r in rows):
            raise ValueError("Q must be n x n")
        for entry in itertools.chain(*rows):
            if not isinstance(entry, PolyField) or entry.n != self.n:
                raise ValueError("Q entries must be PolyFields of dimension n")
        object.__setattr__(self, "Q", rows)

    # -- constructors ---------------------------------------------------------
    @classmethod
    def standard(cls, n: int, radius: float = 1.0):
        zero = PolyField(n, {})
        return cls(n, tuple(tuple(zero for _ in range(n)) for _ in range(n)), radius)

    @classmethod
    def from_entries(cls, n: int, entries, radius: float = 1.0):
        """``entries``: mapping ``(i, j) -> PolyField`` (0-based)."""
        zero = PolyField(n, {})
        Q = [[entries.get((i, j), zero) for j in range(n)] for i in range(n)]
        return cls(n, tuple(map(tuple, Q)), radius)

    @classmethod
    def random(
        cls,
        n: int,
        seed: int,
        bound: float,
        degree: int = 2,
        radius: float = 1.0,
        min_degree: int = 1,
        factor: PolyField | None = None,
    ):
        """Seeded random polynomial structure with ``sup ||Q|| <= bound``.

        The bound is enforced through the coefficient estimate on the ball of
        the given radius (entrywise ``sum |c| R^deg``, then Frobenius), so it
        is rigorous.  ``factor`` multiplies every entry (used to make ``Q``
        vanish to high order along a chosen locus).
        """
        rng = np.random.default_rng(seed)
        monos = []
        for d in range(min_degree, degree + 1):
            for split in range(d + 1):
                for alpha in _multi_indices(n, split):
                    for beta in _multi_indices(n, d - split):
                        monos.append((alpha, beta))
        Q = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                coeffs = rng.standard_normal(len(monos)) + 1j * rng.standard_normal(len(monos))
                f = PolyField(n, dict(zip(monos, coeffs)))
                if factor is not None:
                    f = f * factor
                Q[i][j] = f
        raw = cls(n, tuple(map(tuple, Q)), radius)
        b = raw.coefficient_bound(radius)
        scale = 0.0 if b == 0 else bound / b
        Q = [[PolyField(n, {k: v * scale for k, v in e.terms.items()}) for e in row] for row in Q]
        return cls(n, tuple(map(tuple, Q)), radius)

    # -- evaluation -------------------------------------------------------------
    def q(self, z):
        """``Q`` at complex points ``(..., n)`` -> ``(..., n, n)``."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape[:-1] + (self.n, self.n), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                if not self.Q[i][j].is_zero():
                    out[..., i, j] = self.Q[i][j].evaluate(z)
        return out

    def q_real_derivative(self, z, k: int):
        """Derivative of ``Q`` along real coordinate ``k`` (block ordering)."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape[:-1] + (self.n, self.n), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                e = self.Q[i][j]
                if not e.is_zero():
                    out[..., i, j] = e.real_derivative(k).evaluate(z)
        return out

    def j(self, x):
        """Real structure matrices at real points ``x`` of shape ``(..., 2n)``."""
        return j_matrix(self.q(to_complex(x)))

    @property
    def degree(self) -> int:
        return max(e.degree for e in itertools.chain(*self.Q))

    def is_standard(self) -> bool:
        return all(e.is_zero() for e in itertools.chain(*self.Q))

    def is_centered(self, tol: float = 1e-14) -> bool:
        zero = np.zeros(self.n, dtype=complex)
        return bool(np.max(np.abs(self.q(zero))) <= tol)

    def entries(self):
        return list(itertools.chain(*self.Q))

    # -- norms ------------------------------------------------------------------
    def coefficient_bound(self, radius: float | None = None) -> float:
        """Rigorous bound for ``sup ||Q||_op`` on the ball (Frobenius of entry bounds)."""
        R = self.radius if radius is None else radius
        b = np.array([[e.sup_bound(R) for e in row] for row in self.Q])
        return float(np.sqrt(np.sum(b**2)))

    def derivative_coefficient_bound(self, radius: float | None = None) -> float:
        R = self.radius if radius is None else radius
        b = np.array([[e.derivative_bound(R) for e in row] for row in self.Q])
        return float(np.sqrt(np.sum(b**2)))

    def sampled_sup_norm(self, radius: float | None = None, per_axis: int = 11) -> float:
        """Max operator norm of ``Q`` over a cartesian grid inside the ball."""
        R = self.radius if radius is None else radius
        if self.is_standard():
            return 0.0
        pts = ball_grid(self.n, R, per_axis)
        best = 0.0
        for chunk in np.array_split(pts, max(1, len(pts) // 20000)):
            Qs = self.q(to_complex(chunk))
            best = max(best, float(np.max(np.linalg.norm(Qs, ord=2, axis=(-2, -1)))))
        return best

    def validate(self, per_axis: int = 11) -> float:
        """Check ``||Q|| < 1`` on the chart ball; return the bound used."""
        b = self.coefficient_bound()
        if b < 1.0:
            return b
        s = self.sampled_sup_norm(per_axis=per_axis)
        if s >= 1.0:
            raise StructureInvalid(f"sup ||Q|| = {s:.3g} >= 1 on the chart ball")
        return s

    def check_point(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if np.any(np.linalg.norm(x, axis=-1) > self.radius * (1 + 1e-12)):
            raise OutOfChart(f"point outside chart ball of radius {self.radius}")

    # -- serialization ------------------------------------------------------------
    def to_dict(self):
        return {
            "n": self.n,
            "radius": self.radius,
            "Q": [[e.to_records() for e in row] for row in self.Q],
        }

    @classmethod
    def from_dict(cls, d):
        n = d["n"]
        Q = [[PolyField.from_records(n, recs) for recs in row] for row in d["Q"]]
        return cls(n, tuple(map(tuple, Q)), float(d.get("radius", 1.0)))


def j_from_q(S: StructureField, p) -> np.ndarray:
    """Real structure matrix at a single point ``p`` (complex ``n`` vector)."""
    p = np.asarray(p, dtype=complex)
    if np.linalg.norm(p) > S.radius * (1 + 1e-12):
        raise OutOfChart("point outside the chart ball")
    return j_matrix(S.q(p))


def dilate(S: StructureField, lam: float) -> StructureField:
    """Isotropic dilation: ``Q'(w) = Q(lam w)``, radius ``R / lam``."""
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    Q = tuple(tuple(e.scale_argument(lam) for e in row) for row in S.Q)
    return StructureField(S.n, Q, S.radius / lam)


@dataclass(frozen=True)
class ShrinkResult:
    lam: float
    structure: StructureField
    sup_bound: float
    derivative_bound: float
    sampled_sup: float


def shrink_to_contraction(S: StructureField, theta: float, per_axis: int = 7) -> ShrinkResult:
    """Largest dilation factor ``lam <= 1`` with ``Q(lam w)`` and its first
    derivatives bounded by ``theta`` on the unit ball.

    The decision uses the coefficient bound (rigorous and monotone in
    ``lam``); a grid sample of the result is reported alongside.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if not S.is_centered():
        raise NotCentered("Q(0) != 0; translate the chart first")

    def bound(lam):
        D = dilate(S, lam)
        return max(D.coefficient_bound(1.0), D.derivative_coefficient_bound(1.0))

    if bound(1.0) <= theta:
        lam = 1.0
    else:
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if bound(mid) <= theta:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        lam = lo
    D = dilate(S, lam)
    D = StructureField(D.n, D.Q, 1.0)
    return ShrinkResult(
        lam=lam,
        structure=D,
        sup_bound=D.coefficient_bound(1.0),
        derivative_bound=D.derivative_coefficient_bound(1.0),
        sampled_sup=D.sampled_sup_norm(1.0, per_axis=per_axis),
    )


def ball_grid(n: int, radius: float, per_axis: int) -> np.ndarray:
    """Cartesian grid of real points inside the closed ball in ``R^{2n}``."""
    axis = np.linspace(-radius, radius, per_axis)
    mesh = np.stack(np.meshgrid(*([axis] * (2 * n)), indexing="ij"), axis=-1).reshape(-1, 2 * n)
    return mesh[np.linalg.norm(mesh, axis=-1) <= radius * (1 + 1e-12)]


def _multi_indices(n: int, total: int) -> List[tuple]:
    if n == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in _multi_indices(n - 1, total - first):
            out.append((first,) + rest)
    return out
