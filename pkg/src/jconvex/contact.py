"""Confoliations and contact forms on hypersurfaces of the chart.

For a level set ``Γ = {f = c}`` in ``C^n`` (real dimension ``2n - 1``) the
form ``α = J^*df`` restricted to ``TΓ`` is contact when
``α ∧ (dα)^{n-1} ≠ 0`` on ``TΓ``.  It is evaluated on an oriented
orthonormal frame of ``TΓ`` by the full antisymmetrized expansion.

The confoliation condition uses ``α = -J^*dr`` so that
``dα(X, JX) = L_r(X)`` for ``X ∈ ξ = TΓ ∩ J TΓ``.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Sequence

import numpy as np

from .errors import CriticalLevel, DegenerateBoundary, FrameIllConditioned, RootFindFailed
from .forms import EPS_PAIR, jstar_covector, two_form_matrix
from .exhaustion import project_to_level
from .levi import xi_basis
from .polyfield import PolyField, to_complex
from .structure import j_matrix

GRAD_TOL = 1e-12
FRAME_COND_LIMIT = 1e8
MAX_FRAME_DIM = 7
NONCRITICAL_TOL = 1e-6
DPI_STEP = 1e-4
TANGENT_STEP = 1e-3


def _j_at(S, x):
    return j_matrix(S.q(to_complex(x)))


# -- frames -------------------------------------------------------------------
@dataclass
class HypersurfacePointFrame:
    """Oriented orthonormal frame of ``TΓ`` at ``point``.

    Rows of ``basis`` are the frame vectors: first the ``2n - 2`` vectors of
    ``xi`` (a basis of ``ξ``), then the unit vector of ``TΓ`` orthogonal to
    ``ξ``.  ``det[normal, basis] > 0``.
    """

    point: np.ndarray
    normal: np.ndarray
    basis: np.ndarray
    J: np.ndarray

    @property
    def xi(self) -> np.ndarray:
        return self.basis[:-1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


def frames(S, f, points) -> List[HypersurfacePointFrame]:
    x = np.atleast_2d(np.asarray(points, dtype=float))
    g = f.gradient(x)
    gn = np.linalg.norm(g, axis=-1)
    if np.min(gn) <= GRAD_TOL:
        raise DegenerateBoundary("gradient vanishes on the hypersurface")
    nrm = g / gn[:, None]
    J = _j_at(S, x)
    B = np.swapaxes(xi_basis(J, g), -1, -2)  # (N, 2n-2, 2n)
    out = []
    for i in range(len(x)):
        # unit vector of ker dr orthogonal to ξ
        M = np.vstack([nrm[i], B[i]])
        _, _, Vt = np.linalg.svd(M)
        T = Vt[-1]
        basis = np.vstack([B[i], T])
        if np.linalg.det(np.vstack([nrm[i], basis])) < 0:
            basis[-1] = -T
        out.append(HypersurfacePointFrame(x[i], nrm[i], basis, J[i]))
    return out


# -- wedge products -----------------------------------------------------------
@lru_cache(maxsize=None)
def _permutations(m: int):
    perms = np.array(list(itertools.permutations(range(m))), dtype=int)
    # parity via inversion count
    inv = np.zeros(len(perms), dtype=int)
    for i in range(m):
        for j in range(i + 1, m):
            inv += perms[:, i] > perms[:, j]
    return perms, np.where(inv % 2 == 0, 1.0, -1.0)


def alpha_wedge_dalpha(a: np.ndarray, W: np.ndarray) -> float:
    """``(α ∧ (dα)^k)(e_0, ..., e_{2k})`` from ``a_i = α(e_i)`` and
    ``W_ij = dα(e_i, e_j)``; ``(dx ∧ dy)(∂x, ∂y) = 1`` convention."""
    m = len(a)
    if m % 2 != 1:
        raise ValueError("need an odd number of frame vectors")
    if m > MAX_FRAME_DIM:
        raise ValueError(f"permutation expansion capped at {MAX_FRAME_DIM} vectors")
    k = (m - 1) // 2
    perms, signs = _permutations(m)
    prod = a[perms[:, 0]]
    for i in range(k):
        prod = prod * W[perms[:, 2 * i + 1], perms[:, 2 * i + 2]]
    return float(np.sum(signs * prod) / 2**k)


@dataclass
class ContactSample:
    frame: HypersurfacePointFrame
    alpha: np.ndarray  # α(e_i)
    dalpha: np.ndarray  # dα(e_i, e_j)
    value: float
    confoliation_min: float

    def to_dict(self):
        return {
            "point": self.frame.point.tolist(),
            "alpha": self.alpha.tolist(),
            "value": self.value,
            "confoliation_min": self.confoliation_min,
        }


def _contact_on_frames(S, f, fr: List[HypersurfacePointFrame], eps_pair, sign=1.0,
                       basis=None) -> List[ContactSample]:
    x = np.array([F.point for F in fr])
    cov = jstar_covector(S, f)
    a_amb = sign * cov(x)
    Om = sign * two_form_matrix(cov, x, eps_pair)
    out = []
    for i, F in enumerate(fr):
        E = F.basis if basis is None else basis[i]
        gram = E @ E.T
        if np.linalg.cond(gram) > FRAME_COND_LIMIT:
            raise FrameIllConditioned("frame vectors are nearly dependent")
        a = E @ a_amb[i]
        W = E @ Om[i] @ E.T
        val = alpha_wedge_dalpha(a, W) / math.sqrt(np.linalg.det(gram))
        Xi = F.xi
        Jxi = Xi @ F.J.T  # rows J e_k
        C = Xi @ Om[i] @ Jxi.T  # dα(e_k, J e_l)
        conf = float(np.linalg.eigvalsh(0.5 * (C + C.T))[0])
        out.append(ContactSample(F, a, W, val, conf))
    return out


def contact_value(S, f, p, eps_pair=EPS_PAIR, basis=None) -> ContactSample:
    """``α ∧ (dα)^{n-1}`` for ``α = J^*df`` on ``T{f = f(p)}`` at ``p``.

    With ``basis`` (rows spanning ``TΓ``) the value is divided by the square
    root of the Gram determinant, so it only depends on the orientation.
    """
    F = frames(S, f, np.atleast_2d(p))
    b = None if basis is None else [np.asarray(basis, dtype=float)]
    return _contact_on_frames(S, f, F, eps_pair, basis=b)[0]


def contact_values(S, f, points, eps_pair=EPS_PAIR) -> List[ContactSample]:
    return _contact_on_frames(S, f, frames(S, f, points), eps_pair)


@dataclass
class ConfoliationResult:
    minimum: float
    argmin: np.ndarray
    values: np.ndarray

    def to_dict(self):
        return {"minimum": self.minimum, "argmin": self.argmin.tolist(), "n_points": int(self.values.size)}


def confoliation_check(S, r, points, eps_pair=EPS_PAIR) -> ConfoliationResult:
    """Min over samples and unit ``X ∈ ξ`` of ``dα(X, JX)`` with ``α = -J^*dr``."""
    samples = _contact_on_frames(S, r, frames(S, r, points), eps_pair, sign=-1.0)
    vals = np.array([s.confoliation_min for s in samples])
    k = int(np.argmin(vals))
    return ConfoliationResult(float(vals[k]), samples[k].frame.point, vals)


# -- level sets of φ = r e^{-Aψ} ------------------------------------------------
@dataclass(frozen=True)
class PhiField:
    """``φ = c · r e^{-Aψ}`` with analytic gradient."""

    r: PolyField
    psi: PolyField
    A: float
    c: float = 1.0

    @property
    def n(self):
        return self.r.n

    def evaluate_real(self, x):
        return self.c * self.r.evaluate_real(x) * np.exp(-self.A * self.psi.evaluate_real(x))

    def gradient(self, x):
        e = np.exp(-self.A * self.psi.evaluate_real(x))[..., None]
        rv = self.r.evaluate_real(x)[..., None]
        return self.c * e * (self.r.gradient(x) - self.A * rv * self.psi.gradient(x))


def march(r, phi, level: float, q, bracket: float, tol: float = 1e-13) -> np.ndarray:
    """Points ``q + s ν(q)`` with ``φ = level``, ``ν = -∇r/|∇r|``.

    Bisection on ``[-bracket/10, bracket]`` followed by Newton polish in
    ``s``; the small outward part serves points just inside ``bΩ`` that are
    already past a level close to 0.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    g = r.gradient(q)
    nu = -g / np.linalg.norm(g, axis=-1, keepdims=True)

    def h(s):
        return phi.evaluate_real(q + s[:, None] * nu) - level

    lo = np.full(len(q), -0.1 * bracket)
    hi = np.full(len(q), bracket)
    flo, fhi = h(lo), h(hi)
    bad = ~((flo >= 0) & (fhi < 0))
    if np.any(bad):
        raise RootFindFailed(
            f"normal line misses the level set within {bracket:.3g} at {q[np.argmax(bad)].tolist()}"
        )
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = h(mid)
        up = fm >= 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.max(hi - lo) < 1e-9:
            break
    s = 0.5 * (lo + hi)
    for _ in range(8):
        pts = q + s[:, None] * nu
        d = np.einsum("ni,ni->n", phi.gradient(pts), nu)
        step = (phi.evaluate_real(pts) - level) / d
        s = s - step
        if np.max(np.abs(step)) < tol:
            break
    return q + s[:, None] * nu


def _tangent_projector(r, x):
    g = r.gradient(x)
    nrm = g / np.linalg.norm(g, axis=-1, keepdims=True)
    return np.eye(x.shape[-1]) - np.einsum("ni,nj->nij", nrm, nrm)


def reference_form(S, r, phi):
    """Ambient tangent-projected covectors of ``J^*dφ`` on ``bΩ``."""
    cov = jstar_covector(S, phi)

    def form(x):
        return np.einsum("nij,nj->ni", _tangent_projector(r, x), cov(x))

    return form


def pulled_back_form(S, r, phi, level: float, bracket: float, h: float = DPI_STEP):
    """Ambient tangent-projected covectors of ``π^*(J^*dφ)`` on ``bΩ``.

    ``π`` is the normal march onto ``{φ = level}``; ``dπ`` is a central
    difference of the march map with step ``h``.
    """
    cov = jstar_covector(S, phi)

    def form(x):
        x = np.atleast_2d(x)
        N, m = x.shape
        base = march(r, phi, level, x, bracket)
        c = cov(base)
        D = np.zeros((N, m, m))
        for k in range(m):
            e = np.zeros(m)
            e[k] = h
            D[:, :, k] = (march(r, phi, level, x + e, bracket) - march(r, phi, level, x - e, bracket)) / (2 * h)
        amb = np.einsum("nki,nk->ni", D, c)  # dπ^T c
        return np.einsum("nij,nj->ni", _tangent_projector(r, x), amb)

    return form


@dataclass
class BoundaryFormSamples:
    """Form values at boundary points plus tangential stencils.

    ``stencil[:, i, 0]`` and ``stencil[:, i, 1]`` are the values at the
    boundary points reached from ``p ± h E_i``.
    """

    points: np.ndarray
    values: np.ndarray
    stencil: np.ndarray | None = None
    h: float = TANGENT_STEP

    def derivatives(self) -> np.ndarray:
        return (self.stencil[:, :, 0] - self.stencil[:, :, 1]) / (2 * self.h)


def tangent_frames(r, points) -> np.ndarray:
    """Orthonormal tangent frames of ``{r = r(p)}``: ``(N, 2n-1, 2n)``."""
    g = r.gradient(points)
    _, _, Vt = np.linalg.svd(g[:, None, :])
    return Vt[:, 1:, :]


def sample_form(form, r, points, k: int = 1, h: float = TANGENT_STEP) -> BoundaryFormSamples:
    """Values of ``form`` at ``points`` and, for ``k = 1``, tangential stencils."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    vals = form(x)
    if k == 0:
        return BoundaryFormSamples(x, vals, None, h)
    E = tangent_frames(r, x)
    N, d, m = E.shape
    st = np.zeros((N, d, 2, m))
    for i in range(d):
        for j, sgn in enumerate((1.0, -1.0)):
            y = project_to_level(r, x + sgn * h * E[:, i, :], 0.0)
            st[:, i, j] = form(y)
    return BoundaryFormSamples(x, vals, st, h)


def ck_distance(a: BoundaryFormSamples, b: BoundaryFormSamples, k: int) -> float:
    """``k = 0``: sup of ``|a - b|``; ``k = 1``: also sup of tangential
    derivative differences."""
    if k not in (0, 1):
        raise ValueError("only k = 0 and k = 1 are supported")
    d0 = float(np.max(np.linalg.norm(a.values - b.values, axis=-1)))
    if k == 0:
        return d0
    if a.stencil is None or b.stencil is None:
        raise ValueError("k = 1 needs stencil samples")
    d1 = float(np.max(np.linalg.norm(a.derivatives() - b.derivatives(), axis=-1)))
    return max(d0, d1)


@dataclass
class LevelRecord:
    delta: float
    level: float
    noncritical: bool
    min_grad_rho: float
    contact_min: float = math.nan
    contact_max: float = math.nan
    sign_constant: bool = False
    d0: float = math.nan
    d1: float = math.nan
    error: str | None = None

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class ApproximationRecord:
    deltas: list
    levels: List[LevelRecord]
    boundary_points: np.ndarray
    confoliation_min: float
    alpha_samples: dict = field(default_factory=dict, repr=False)

    @property
    def distances(self):
        return [(lv.d0, lv.d1) for lv in self.levels if lv.error is None]

    def monotone(self, k: int = 0, noise: float = 0.1) -> bool:
        d = [lv.d0 if k == 0 else lv.d1 for lv in self.levels if lv.error is None]
        return all(b <= a * (1 + noise) for a, b in zip(d, d[1:]))

    def to_dict(self):
        return {
            "deltas": list(self.deltas),
            "n_points": int(len(self.boundary_points)),
            "confoliation_min": self.confoliation_min,
            "levels": [lv.to_dict() for lv in self.levels],
            "monotone_c0": self.monotone(0),
            "monotone_c1": self.monotone(1),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = self.boundary_points.shape[1]
        w.writerow(["delta", "sample"] + [f"x{i}" for i in range(m)] + [f"a{i}" for i in range(m)])
        for delta, vals in self.alpha_samples.items():
            for i, (x, a) in enumerate(zip(self.boundary_points, vals)):
                w.writerow([repr(delta), i] + [repr(float(c)) for c in x] + [repr(float(c)) for c in a])
        return buf.getvalue()


def level_set_approximation(S, domain, psi, A: float, eta: float, deltas: Sequence[float],
                            points, k: int = 1, collar: float | None = None,
                            phi_scale: float = 1.0) -> ApproximationRecord:
    """Pull ``J^*dφ`` back from the levels ``{ρ = -δ} = {φ = -δ^{1/η}}`` to ``bΩ``.

    For each ``δ``: check ``|dρ| > NONCRITICAL_TOL`` on the level samples,
    record contact minima there and the ``C^0``/``C^1`` distances between the
    pulled-back form and ``J^*dφ`` on ``bΩ``.
    """
    r = domain.r
    x = np.atleast_2d(np.asarray(points, dtype=float))
    phi = PhiField(r, psi, A, phi_scale)
    t0 = domain.t0 if collar is None else collar
    gmin = float(np.min(np.linalg.norm(r.gradient(x), axis=-1)))
    bracket = 2.0 * t0 / gmin
    conf = confoliation_check(S, r, x).minimum
    ref = sample_form(reference_form(S, r, phi), r, x, k)
    levels, alpha_samples = [], {}
    for delta in deltas:
        level = -phi_scale * delta ** (1.0 / eta)
        rec = LevelRecord(float(delta), float(level), False, math.nan)
        try:
            on = march(r, phi, level, x, bracket)
            gphi = np.linalg.norm(phi.gradient(on), axis=-1) / abs(phi_scale)
            grad_rho = eta * (-level / phi_scale) ** (eta - 1.0) * gphi
            rec.min_grad_rho = float(np.min(grad_rho))
            if rec.min_grad_rho <= NONCRITICAL_TOL:
                raise CriticalLevel(f"|dρ| = {rec.min_grad_rho:.3g} on the level δ = {delta}")
            rec.noncritical = True
            vals = np.array([s.value for s in contact_values(S, phi, on)])
            rec.contact_min = float(np.min(np.abs(vals)))
            rec.contact_max = float(np.max(np.abs(vals)))
            rec.sign_constant = bool(np.all(vals > 0) or np.all(vals < 0))
            pulled = sample_form(pulled_back_form(S, r, phi, level, bracket), r, x, k)
            rec.d0 = ck_distance(pulled, ref, 0)
            if k == 1:
                rec.d1 = ck_distance(pulled, ref, 1)
            alpha_samples[float(delta)] = pulled.values
        except (CriticalLevel, RootFindFailed) as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        levels.append(rec)
    return ApproximationRecord(list(deltas), levels, x, conf, alpha_samples)
