"""Polynomial changes of coordinates acting on structures.

A diffeomorphism germ ``w = Φ(z)`` transports ``Q`` to

    Q'(w) = (Φ_z Q - Φ_z̄)(conj(Φ_z) - conj(Φ_z̄) Q)^{-1},   z = Φ^{-1}(w),

where ``Φ_z`` and ``Φ_z̄`` are the complex Jacobians ``∂Φ_s/∂z_m`` and
``∂Φ_s/∂z̄_m``.  With ``Q(z) = Σ A_k z_k + B(z̄) + O(|z|^2)``, the quadratic
map ``Φ(z) = z + Σ φ_{kj} z_k z̄_j`` with ``φ^s_{kj} = (A_k)_{sj}`` removes
the ``z``-linear part of ``Q`` at the origin; the ``z̄``-linear part stays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discs.solver import DiscConfig, solve_disc
from .errors import NewtonDiverged, NotCentered, NotNormalized, OutOfChart, SingularJacobian
from .polyfield import PolyField, to_complex, to_real
from .levi import levi_direct, levi_disc
from .structure import StructureField

NEWTON_TOL = 1e-13
COND_LIMIT = 1e12


def _cjac_to_real(A, B):
    """Real Jacobian of ``dw = A dz + B dz̄`` in block coordinates."""
    P, M = A + B, A - B
    top = np.concatenate([P.real, -M.imag], axis=-1)
    bot = np.concatenate([P.imag, M.real], axis=-1)
    return np.concatenate([top, bot], axis=-2)


@dataclass(frozen=True)
class PolynomialMap:
    """Polynomial map ``C^n -> C^n`` given by its component PolyFields."""

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def n(self) -> int:
        return len(self.components)

    @classmethod
    def identity(cls, n: int):
        return cls(tuple(PolyField.z(n, s) for s in range(n)))

    @classmethod
    def linear(cls, M):
        """``z -> M z`` for a complex matrix ``M``."""
        M = np.asarray(M, dtype=complex)
        n = M.shape[0]
        return cls(tuple(
            PolyField(n, {(tuple(int(i == m) for i in range(n)), (0,) * n): M[s, m]
                          for m in range(n) if M[s, m] != 0})
            for s in range(n)
        ))

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.stack([c.evaluate(z) for c in self.components], axis=-1)

    def jac_z(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.stack(
            [np.stack([c.dz(m).evaluate(z) for m in range(self.n)], -1) for c in self.components], -2
        )

    def jac_zbar(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.stack(
            [np.stack([c.dzbar(m).evaluate(z) for m in range(self.n)], -1) for c in self.components], -2
        )

    def real_jacobian(self, z) -> np.ndarray:
        return _cjac_to_real(self.jac_z(z), self.jac_zbar(z))

    def push_vector(self, z, t) -> np.ndarray:
        """``dΦ(z) t`` for a real tangent vector ``t``."""
        return self.real_jacobian(z) @ np.asarray(t, dtype=float)

    def inverse(self, w, z0=None, tol: float = NEWTON_TOL, max_iter: int = 50) -> np.ndarray:
        """Newton inversion at points ``w`` (shape ``(..., n)``)."""
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        wf = w.reshape(-1, self.n)
        z = (wf if z0 is None else np.asarray(z0, dtype=complex).reshape(-1, self.n)).copy()
        target = to_real(wf)
        for _ in range(max_iter):
            res = to_real(self(z)) - target
            if not np.all(np.isfinite(res)):
                break
            if np.max(np.abs(res)) < tol:
                return z.reshape(shape)
            D = self.real_jacobian(z)
            if np.max(np.linalg.cond(D)) > COND_LIMIT:
                raise SingularJacobian("map Jacobian is singular near the preimage")
            z = to_complex(to_real(z) - np.linalg.solve(D, res[..., None])[..., 0])
            if np.max(np.abs(z)) > 1e6:
                break
        raise NewtonDiverged("Newton inversion of the coordinate map did not converge")

    def to_dict(self):
        return {"components": [c.to_records() for c in self.components]}


@dataclass(frozen=True)
class NormalizationMap(PolynomialMap):
    """``Φ(z) = z + Σ φ_{kj} z_k z̄_j`` with ``phi[k, j, s] = φ^s_{kj}``."""

    phi: np.ndarray = None
    invertibility_radius: float = np.inf

    @classmethod
    def from_phi(cls, phi):
        phi = np.asarray(phi, dtype=complex)
        n = phi.shape[0]
        comps = []
        for s in range(n):
            terms = {(tuple(int(i == s) for i in range(n)), (0,) * n): 1.0}
            for k in range(n):
                for j in range(n):
                    if phi[k, j, s] != 0:
                        a = tuple(int(i == k) for i in range(n))
                        b = tuple(int(i == j) for i in range(n))
                        terms[(a, b)] = terms.get((a, b), 0) + phi[k, j, s]
            comps.append(PolyField(n, terms))
        # |dΦ(z) - I| <= 2 |z| Σ|φ_kj|; keep it below 1/2
        c = float(np.sum(np.linalg.norm(phi, axis=-1)))
        radius = np.inf if c == 0 else 1.0 / (4.0 * c)
        return cls(tuple(comps), phi, radius)

    def matrices(self):
        """``Φ_k`` with entries ``(Φ_k)_{sj} = φ^s_{kj}``."""
        return [self.phi[k].T.copy() for k in range(self.phi.shape[0])]

    def is_identity(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.phi), initial=0.0) <= tol)

    def to_dict(self):
        return {
            "phi_re": self.phi.real.tolist(),
            "phi_im": self.phi.imag.tolist(),
            "invertibility_radius": None if np.isinf(self.invertibility_radius)
            else self.invertibility_radius,
        }


def pushforward_q_at(S, F: PolynomialMap, z) -> np.ndarray:
    """``Q'`` at ``w = F(z)`` given the preimage ``z`` directly."""
    z = np.asarray(z, dtype=complex)
    Q = S.q(z)
    A, B = F.jac_z(z), F.jac_zbar(z)
    num = A @ Q - B
    den = np.conj(A) - np.conj(B) @ Q
    if np.max(np.linalg.cond(den)) > COND_LIMIT:
        raise SingularJacobian("pushforward denominator is singular")
    # num @ inv(den) == solve(den^T, num^T)^T
    return np.swapaxes(np.linalg.solve(np.swapaxes(den, -1, -2), np.swapaxes(num, -1, -2)), -1, -2)


def pushforward_q(S, F: PolynomialMap, w, z0=None) -> np.ndarray:
    """``Q'(w)`` for the structure transported by ``F``."""
    z = F.inverse(w, z0)
    if np.any(np.linalg.norm(np.atleast_2d(z), axis=-1) > S.radius * (1 + 1e-12)):
        raise OutOfChart("preimage outside the chart")
    return pushforward_q_at(S, F, z)


class PushforwardStructure:
    """``F_* S`` evaluated pointwise; exposes the ``q`` protocol used by
    the Levi and form routines."""

    def __init__(self, S, F: PolynomialMap, radius: float = np.inf, hint=None):
        self.S = S
        self.F = F
        self.n = S.n
        self.radius = radius
        self._hint = None if hint is None else np.asarray(hint, dtype=complex)

    def q(self, w):
        w = np.asarray(w, dtype=complex)
        z0 = None
        if self._hint is not None:
            # affine first guess around the hint point
            D = self.F.real_jacobian(self._hint)
            dw = to_real(w) - to_real(self.F(self._hint))
            z0 = to_complex(to_real(self._hint) + dw @ np.linalg.inv(D).T)
        return pushforward_q(self.S, self.F, w, z0)

    def is_standard(self) -> bool:
        return False


def linear_coefficients(S: StructureField):
    """``(A, B)`` with ``Q = Σ_k A[k] z_k + Σ_k B[k] z̄_k + O(|z|^2)`` (exact)."""
    n = S.n
    A = np.zeros((n, n, n), dtype=complex)
    B = np.zeros((n, n, n), dtype=complex)
    zero = (0,) * n
    for k in range(n):
        e = tuple(int(i == k) for i in range(n))
        for s in range(n):
            for j in range(n):
                A[k, s, j] = S.Q[s][j].coefficient(e, zero)
                B[k, s, j] = S.Q[s][j].coefficient(zero, e)
    return A, B


def fd_q_derivatives(q, n: int, point=None, h: float = 1e-5):
    """Central differences ``∂Q/∂z_k`` and ``∂Q/∂z̄_k`` of a ``q`` callable.

    Returns arrays of shape ``(n, n, n)`` indexed ``[k, s, j]``.
    """
    p = np.zeros(n, dtype=complex) if point is None else np.asarray(point, dtype=complex)
    dz = np.zeros((n, n, n), dtype=complex)
    dzb = np.zeros((n, n, n), dtype=complex)
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = h
        dx = (q(p + e) - q(p - e)) / (2 * h)
        dy = (q(p + 1j * e) - q(p - 1j * e)) / (2 * h)
        dz[k] = 0.5 * (dx - 1j * dy)
        dzb[k] = 0.5 * (dx + 1j * dy)
    return dz, dzb


def _matmul(A, B, degree):
    n = len(A)
    m = len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = PolyField(A[0][0].n, {})
            for k in range(len(B)):
                if A[i][k].is_zero() or B[k][j].is_zero():
                    continue
                acc = acc + A[i][k].multiply(B[k][j], degree)
            row.append(acc)
        out.append(row)
    return out


def _matadd(A, B, sign=1.0):
    return [[a + b * sign for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def _truncated_pushforward(S: StructureField, F: NormalizationMap, degree: int) -> StructureField:
    """Taylor polynomial of ``F_* Q`` in ``w`` up to ``degree``."""
    n = S.n
    comps = F.components
    Az = [[c.dz(m) for m in range(n)] for c in comps]
    Bz = [[c.dzbar(m) for m in range(n)] for c in comps]
    Q = [list(row) for row in S.Q]
    num = _matadd(_matmul(Az, Q, degree), Bz, -1.0)
    den = _matadd([[a.conj() for a in row] for row in Az],
                  _matmul([[b.conj() for b in row] for row in Bz], Q, degree), -1.0)
    eye = [[PolyField.constant(n, float(i == j)) for j in range(n)] for i in range(n)]
    E = _matadd(den, eye, -1.0)  # no constant term since Q(0) = 0
    inv, power = eye, eye
    for _ in range(degree):
        power = _matmul(power, E, degree)
        power = [[-p for p in row] for row in power]
        inv = _matadd(inv, power)
    Qz = _matmul(num, inv, degree)
    # Φ^{-1}(w) by fixed point: G = w - Σ φ_{kj} G_k conj(G_j)
    w = [PolyField.z(n, s) for s in range(n)]
    G = list(w)
    for _ in range(degree):
        G = [
            w[s] - sum(
                (G[k].multiply(G[j].conj(), degree) * F.phi[k, j, s]
                 for k in range(n) for j in range(n) if F.phi[k, j, s] != 0),
                PolyField(n, {}),
            )
            for s in range(n)
        ]
    Qw = [[e.compose(G, degree).truncate(degree) for e in row] for row in Qz]
    radius = min(S.radius, F.invertibility_radius)
    return StructureField(n, tuple(map(tuple, Qw)), radius)


def normalize_at_origin(S: StructureField, degree: int | None = None, tol: float = 1e-14):
    """Quadratic normalization: returns ``(Φ, Φ_* S)`` with ``Q'(0) = 0`` and
    ``∂Q'/∂z_k(0) = 0``.  ``Φ_* S`` is the Taylor polynomial of the transported
    structure up to ``degree`` (default ``deg Q + 1``)."""
    if not S.is_centered(tol):
        raise NotCentered("Q(0) != 0; centre the chart first")
    n = S.n
    A, _ = linear_coefficients(S)
    phi = np.zeros((n, n, n), dtype=complex)
    for k in range(n):
        phi[k] = A[k].T  # phi[k, j, s] = A[k][s, j]
    F = NormalizationMap.from_phi(phi)
    if F.is_identity():
        return F, S
    d = degree if degree is not None else max(S.degree, 1) + 1
    return F, _truncated_pushforward(S, F, d)


def is_normalized(S, tol: float = 1e-10) -> bool:
    zero = np.zeros(S.n, dtype=complex)
    if np.max(np.abs(S.q(zero))) > tol:
        return False
    if isinstance(S, StructureField):
        A, _ = linear_coefficients(S)
    else:
        A, _ = fd_q_derivatives(S.q, S.n)
    return bool(np.max(np.abs(A)) <= tol)


def pushforward_levi_check(S, F: PolynomialMap, phi: PolyField, p, t):
    """Both sides of the Levi transformation law under ``F``.

    ``lhs`` is the Levi form of ``phi ∘ F`` for ``S`` at ``(p, t)``; ``rhs`` is
    the Levi form of ``phi`` for ``F_* S`` at ``(F(p), dF(p) t)``.
    """
    p = np.asarray(p, dtype=complex)
    t = np.asarray(t, dtype=float)
    lhs = levi_direct(S, phi.compose(F.components), p, t)
    Fp = F(p)
    pushed = PushforwardStructure(S, F, hint=p)
    rhs = levi_direct(pushed, phi, Fp, F.push_vector(p, t))
    return lhs, rhs, abs(lhs - rhs)


def standard_levi(r: PolyField, p, t) -> float:
    """``4 Σ r_{z_j z̄_k}(p) t_j conj(t_k)`` from exact derivatives."""
    n = r.n
    p = np.asarray(p, dtype=complex)
    v = to_complex(np.asarray(t, dtype=float))
    H = np.array([[r.dz(j).dzbar(k).evaluate(p) for k in range(n)] for j in range(n)])
    return float(np.real(4.0 * v @ H @ np.conj(v)))


def levi_in_adapted_coords(S: StructureField, r: PolyField, t, cfg: DiscConfig | None = None,
                           tol: float = 1e-10, check: bool = True):
    """``(L_J, L_std, gap)`` at the origin.

    ``L_J`` comes from a disc, ``L_std`` from the polynomial Hessian.  With
    ``check=False`` the normalization precondition is skipped (negative
    controls).
    """
    if check and not is_normalized(S, tol):
        raise NotNormalized("Q(0) and the z-derivatives of Q at 0 must vanish")
    zero = np.zeros(S.n, dtype=complex)
    L_J = levi_disc(S, r, zero, t, cfg)
    L_std = standard_levi(r, zero, t)
    return L_J, L_std, abs(L_J - L_std)


def disc_transport_residual(S: StructureField, F: PolynomialMap, p, v,
                            cfg: DiscConfig | None = None) -> float:
    """Max over grid nodes of ``|w_ζ̄ + Q'(w) conj(w_ζ)|`` for ``w = F ∘ z``.

    ``z`` is a disc for ``S``; ``Q'`` is evaluated by :func:`pushforward_q`
    with its own Newton inversion, so the value measures consistency of the
    pushforward with the disc equation.
    """
    disc = solve_disc(S, p, v, cfg)
    zeta = disc.grid.nodes.reshape(-1)
    z = disc(zeta)
    zz = disc.d_zeta(zeta)
    zb = disc.d_zetabar(zeta)
    A, B = F.jac_z(z), F.jac_zbar(z)
    w = F(z)
    w_z = np.einsum("...ij,...j->...i", A, zz) + np.einsum("...ij,...j->...i", B, np.conj(zb))
    w_zb = np.einsum("...ij,...j->...i", A, zb) + np.einsum("...ij,...j->...i", B, np.conj(zz))
    Qp = pushforward_q(S, F, w)
    res = w_zb + np.einsum("...ij,...j->...i", Qp, np.conj(w_z))
    return float(np.max(np.abs(res)))


def disc_jet_c(S: StructureField, t, cfg: DiscConfig | None = None, scale: float = 0.05):
    """Normalized ``ζ ζ̄`` coefficient of the disc through 0 tangent to ``t``.

    The disc is solved for ``s t`` with ``|s t| = scale``; the coefficient is
    read from the series and divided by ``s^2``.
    """
    t = np.asarray(t, dtype=float)
    s = scale / np.linalg.norm(t)
    disc = solve_disc(S, np.zeros(S.n, dtype=complex), to_complex(s * t), cfg)
    return disc.coeffs[1, 1] / s**2
