"""Bounded strictly plurisubharmonic exhaustions ``ρ = -(-r e^{-Aψ})^η``.

For ``v`` a tangent vector at a collar point ``p``,

    L_ρ(p; v) = η (-r)^{η-2} e^{-ηAψ} D(v),
    D(v) = A r^2 [L_ψ - ηA |∂ψ(v)|^2]
           + (-r) [L_r - 2ηA Re(∂r(v) conj ∂ψ(v))]
           + (1 - η) |∂r(v)|^2,

with ``∂f(v) = df(v) - i df(Jv)``.  Every term is a real quadratic form in
the real vector ``v``, so ``D`` is handled as a symmetric matrix and its
minimum over unit vectors is an eigenvalue.

A certificate is numerical: it holds on the sample set it records.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import (
    DegenerateBoundary,
    OutsideCollar,
    OutsideDomain,
    PreconditionFailed,
    SearchExhausted,
)
from .forms import EPS_PAIR
from .levi import levi_matrix, levi_on_xi, psh_scan, xi_basis
from .polyfield import PolyField, to_real

REGULARITY_TOL = 1e-6
BOUNDARY_TOL = 1e-6
INNER_FRACTION = 0.05


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _outer(a, b):
    return np.einsum("ni,nj->nij", a, b)


# -- domains ------------------------------------------------------------------
@dataclass(frozen=True)
class DomainSpec:
    """``Ω = {r < 0}`` inside the chart ball of radius ``chart_radius``.

    ``bound`` is the radius of a ball containing ``Ω``; samples are drawn
    from it.  ``collar_depth`` defaults to ``0.1 sup |r|`` over the chart.
    """

    r: PolyField
    name: str = "domain"
    chart_radius: float = 1.0
    bound: float = 1.0
    collar_depth: float | None = None

    @property
    def n(self) -> int:
        return self.r.n

    @property
    def t0(self) -> float:
        if self.collar_depth is not None:
            return self.collar_depth
        pts = uniform_ball(np.random.default_rng(0), 4000, self.n, self.chart_radius)
        pts = np.vstack([pts, np.zeros(2 * self.n)])
        return 0.1 * float(np.max(np.abs(self.r.evaluate_real(pts))))

    @classmethod
    def ball(cls, n: int = 2):
        return cls(PolyField.norm_squared(n) - 1.0, "ball", 1.0, 1.0)

    @classmethod
    def egg(cls, m: int = 2):
        """``|z_1|^2 + |z_2|^{2m} < 1``: Levi flat directions along ``z_2 = 0``."""
        a = PolyField.z(2, 0) * PolyField.zbar(2, 0)
        b = PolyField.z(2, 1) * PolyField.zbar(2, 1)
        r = PolyField(2, (a + b**m - 1.0).terms, real=True)
        # |z|^2 = 1 - s^m + s with s = |z_2|^2; the egg bulges past the unit ball
        s = 1.0 if m == 1 else (1.0 / m) ** (1.0 / (m - 1))
        bound = math.sqrt(1.0 - s**m + s)
        return cls(r, "egg", bound, bound)

    @classmethod
    def shell(cls, n: int = 2):
        """``1/4 < |z|^2 < 1``: the inner sphere is Levi concave."""
        s = PolyField.norm_squared(n)
        return cls((s - 0.25) * (s - 1.0), "shell", 1.0, 1.0)

    @classmethod
    def preset(cls, name: str, **kw):
        makers = {"ball": cls.ball, "egg": cls.egg, "shell": cls.shell}
        if name not in makers:
            raise KeyError(f"unknown domain preset {name!r}")
        return makers[name](**kw)

    def contains(self, x) -> np.ndarray:
        return self.r.evaluate_real(x) < 0

    def in_collar(self, x, inner_fraction: float = 0.0) -> np.ndarray:
        v = self.r.evaluate_real(x)
        return (v > -self.t0) & (v < -inner_fraction * self.t0)

    def collar_samples(self, count: int, seed, inner_fraction: float = INNER_FRACTION) -> np.ndarray:
        """Rejection samples with ``-t0 < r <= -inner_fraction t0``.

        Points too close to ``r = 0`` are excluded: ``D`` scales like ``r^2``
        and ``ρ`` is only Hölder up to the boundary.
        """
        rng = np.random.default_rng(seed)
        out = []
        need = count
        while need > 0:
            pts = uniform_ball(rng, max(4 * need, 256), self.n, self.bound)
            pts = pts[self.in_collar(pts, inner_fraction)]
            out.append(pts[:need])
            need -= len(pts[:need])
        return np.vstack(out)

    def boundary_samples(self, count: int, seed, axis_points: int = 8) -> np.ndarray:
        """Points on ``r = 0``: Newton projection of random points plus
        points on the coordinate complex lines (where degeneracies sit)."""
        rng = np.random.default_rng(seed)
        start = uniform_ball(rng, count, self.n, self.bound)
        axis = []
        for k in range(self.n):
            th = 2 * np.pi * np.arange(axis_points) / axis_points
            z = np.zeros((axis_points, self.n), dtype=complex)
            z[:, k] = 0.9 * self.bound * np.exp(1j * th)
            axis.append(to_real(z))
        pts = project_to_level(self.r, np.vstack([start] + axis), 0.0)
        ok = np.abs(self.r.evaluate_real(pts)) < 1e-12
        ok &= np.linalg.norm(pts, axis=-1) <= self.chart_radius
        return pts[ok]

    def check_regular(self, points) -> float:
        """Smallest ``|dr|`` over the given boundary points."""
        g = np.linalg.norm(self.r.gradient(points), axis=-1)
        m = float(np.min(g))
        if m <= REGULARITY_TOL:
            raise DegenerateBoundary(f"|dr| = {m:.3g} on the boundary")
        return m

    def to_dict(self):
        return {
            "name": self.name,
            "r": self.r.to_records(),
            "chart_radius": self.chart_radius,
            "bound": self.bound,
            "collar_depth": self.t0,
        }


def uniform_ball(rng, count: int, n: int, radius: float) -> np.ndarray:
    d = 2 * n
    v = rng.standard_normal((count, d))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return v * radius * rng.random((count, 1)) ** (1.0 / d)


def project_to_level(f, x, level: float, iters: int = 60, tol: float = 1e-14) -> np.ndarray:
    """Newton steps along the gradient onto ``{f = level}``."""
    x = np.array(x, dtype=float)
    for _ in range(iters):
        v = f.evaluate_real(x) - level
        g = f.gradient(x)
        gg = np.sum(g * g, axis=-1)
        gg = np.where(gg > 0, gg, np.inf)
        x = x - (v / gg)[:, None] * g
        if np.max(np.abs(v)) < tol:
            break
    return x


# -- the exhaustion -----------------------------------------------------------
@dataclass(frozen=True)
class RhoField:
    """``ρ = -(-r)^η e^{-ηAψ}`` with its analytic gradient; NaN outside ``Ω``."""

    r: PolyField
    psi: PolyField
    A: float
    eta: float

    def __post_init__(self):
        if not self.A > 0:
            raise PreconditionFailed("A must be positive")
        if not 0 < self.eta < 1:
            raise PreconditionFailed("eta must lie in (0, 1)")

    @property
    def n(self):
        return self.r.n

    def evaluate_real(self, x):
        s = -self.r.evaluate_real(x)
        with np.errstate(invalid="ignore"):
            return -np.power(s, self.eta) * np.exp(-self.eta * self.A * self.psi.evaluate_real(x))

    def gradient(self, x):
        s = -self.r.evaluate_real(x)
        rho = self.evaluate_real(x)
        return (rho * self.eta)[..., None] * (
            -self.r.gradient(x) / s[..., None] - self.A * self.psi.gradient(x)
        )

    def safe_step(self, x) -> np.ndarray:
        """Circulation step that keeps the stencil inside ``Ω``."""
        s = -self.r.evaluate_real(x)
        g = np.linalg.norm(self.r.gradient(x), axis=-1)
        return np.minimum(EPS_PAIR[0], 0.05 * s / np.maximum(g, 1e-12))


def _eps_for(u, x):
    step = getattr(u, "safe_step", None)
    if step is None:
        return EPS_PAIR
    e = step(x)
    return (e, 0.5 * e)


@dataclass
class DTerms:
    """Diagnostics of ``D(v)`` at one point."""

    psi_term: float
    r_term: float
    grad_term: float

    @property
    def total(self) -> float:
        return self.psi_term + self.r_term + self.grad_term


@dataclass
class CollarData:
    """Levi matrices, gradients and structure at sample points (reused across the ladder)."""

    points: np.ndarray
    r: np.ndarray
    psi: np.ndarray
    G_r: np.ndarray
    G_psi: np.ndarray
    g_r: np.ndarray
    g_psi: np.ndarray
    J: np.ndarray

    @classmethod
    def compute(cls, S, r: PolyField, psi: PolyField, points):
        x = np.atleast_2d(np.asarray(points, dtype=float))
        G_r, J, _ = levi_matrix(S, r, x)
        G_psi, _, _ = levi_matrix(S, psi, x)
        return cls(x, r.evaluate_real(x), psi.evaluate_real(x), G_r, G_psi,
                   r.gradient(x), psi.gradient(x), J)

    def term_matrices(self, A: float, eta: float):
        """The three symmetric matrices whose sum is ``D``."""
        J, gr, gp = self.J, self.g_r, self.g_psi
        Jgr = np.einsum("nji,nj->ni", J, gr)  # covector v -> dr(Jv)
        Jgp = np.einsum("nji,nj->ni", J, gp)
        abs_psi = _outer(gp, gp) + _outer(Jgp, Jgp)
        abs_r = _outer(gr, gr) + _outer(Jgr, Jgr)
        cross = _sym(_outer(gr, gp) + _outer(Jgr, Jgp))
        r = self.r[:, None, None]
        t_psi = A * r**2 * (self.G_psi - eta * A * abs_psi)
        t_r = -r * (self.G_r - 2.0 * eta * A * cross)
        t_g = (1.0 - eta) * abs_r
        return t_psi, t_r, t_g

    def d_matrix(self, A: float, eta: float) -> np.ndarray:
        a, b, c = self.term_matrices(A, eta)
        return a + b + c

    def levi_factor(self, A: float, eta: float) -> np.ndarray:
        return eta * (-self.r) ** (eta - 2.0) * np.exp(-eta * A * self.psi)

    def directions(self, rng) -> np.ndarray:
        """``2n + 2`` unit test directions per point: normal, ``J`` normal,
        a ``ξ`` basis and two random vectors.  Shape ``(N, 2n+2, 2n)``."""
        N, m = self.points.shape
        nrm = self.g_r / np.linalg.norm(self.g_r, axis=-1, keepdims=True)
        Jn = np.einsum("nij,nj->ni", self.J, nrm)
        Jn /= np.linalg.norm(Jn, axis=-1, keepdims=True)
        B = np.swapaxes(xi_basis(self.J, self.g_r), -1, -2)
        rnd = rng.standard_normal((N, 2, m))
        rnd /= np.linalg.norm(rnd, axis=-1, keepdims=True)
        return np.concatenate([nrm[:, None], Jn[:, None], B, rnd], axis=1)


def d_of_v(S, r: PolyField, psi: PolyField, A: float, eta: float, p, v, t0: float | None = None) -> DTerms:
    """``D(v)`` at ``p`` for a (1,0)-vector ``v`` (complex ``n``) or a real ``2n`` vector."""
    p = np.asarray(p)
    x = to_real(p) if np.iscomplexobj(p) or p.shape[-1] == r.n else np.asarray(p, dtype=float)
    v = np.asarray(v)
    X = to_real(v) if np.iscomplexobj(v) or v.shape[-1] == r.n else np.asarray(v, dtype=float)
    rv = float(r.evaluate_real(x))
    if rv >= 0 or (t0 is not None and rv <= -t0):
        raise OutsideCollar(f"r(p) = {rv:.3g} is not in the collar")
    data = CollarData.compute(S, r, psi, x[None, :])
    return DTerms(*(float(X @ M[0] @ X) for M in data.term_matrices(A, eta)))


def rho_levi_matrix(S, rho: RhoField, points) -> np.ndarray:
    """Direct Levi matrix of ``ρ`` with stencils kept inside ``Ω``."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    G, _, _ = levi_matrix(S, rho, x, _eps_for(rho, x))
    return G


# -- certificates -------------------------------------------------------------
@dataclass(frozen=True)
class SearchConfig:
    n_samples: int = 200
    n_boundary: int = 200
    seed: int = 0
    margin: float = 1e-6
    rel_gap: float = 1e-3
    A_ladder: tuple = tuple(2.0**k for k in range(11))
    eta_ladder: tuple = tuple(2.0**-k for k in range(1, 9))
    inner_fraction: float = INNER_FRACTION
    boundary_tol: float = BOUNDARY_TOL


@dataclass
class DFCertificate:
    A: float
    eta: float
    collar: float
    n_samples: int
    min_D: float
    min_levi_rho: float
    agreement_gap: float
    seed: int
    passed: bool
    eta_half_min_D: float = math.nan
    eta_half_pass: bool = False
    margin: float = 1e-6
    boundary_levi_min: float = math.nan
    psi_levi_min: float = math.nan
    worst_point: list = field(default_factory=list)
    ladder: list = field(default_factory=list)
    samples: np.ndarray | None = field(default=None, repr=False)
    terms: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "eta": self.eta,
            "collar": self.collar,
            "n_samples": self.n_samples,
            "min_D": self.min_D,
            "min_levi_rho": self.min_levi_rho,
            "agreement_gap": self.agreement_gap,
            "seed": self.seed,
            "pass": self.passed,
            "eta_half": {"eta": self.eta / 2, "min_D": self.eta_half_min_D, "pass": self.eta_half_pass},
            "margin": self.margin,
            "boundary_levi_min": self.boundary_levi_min,
            "psi_levi_min": self.psi_levi_min,
            "worst_point": self.worst_point,
            "ladder": self.ladder,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.samples is not None and len(self.samples):
            m = self.samples.shape[1]
            w.writerow([f"x{i}" for i in range(m)] + ["psi_term", "r_term", "grad_term", "D"])
            for x, t in zip(self.samples, self.terms):
                w.writerow([repr(float(c)) for c in x] + [repr(t.psi_term), repr(t.r_term),
                                                          repr(t.grad_term), repr(t.total)])
        return buf.getvalue()


def check_preconditions(S, domain: DomainSpec, psi: PolyField, cfg: SearchConfig, collar_pts):
    """``ψ`` strictly psh on the collar and ``Ω`` Levi convex at boundary samples."""
    if domain.bound > S.radius * (1 + 1e-12):
        raise PreconditionFailed(
            f"domain bound {domain.bound:.4g} exceeds the structure chart radius {S.radius:.4g}"
        )
    scan = psh_scan(S, psi, collar_pts, cfg.margin)
    if scan.classification != "strictly-psh":
        raise PreconditionFailed(
            f"psi is not strictly psh on the collar (min Levi {scan.minimum:.3g} at {scan.argmin_point.tolist()})"
        )
    bpts = domain.boundary_samples(cfg.n_boundary, [cfg.seed, 1])
    domain.check_regular(bpts)
    mins, _ = levi_on_xi(S, domain.r, bpts)
    k = int(np.argmin(mins))
    if mins[k] < -cfg.boundary_tol:
        raise PreconditionFailed(
            f"domain is not Levi convex at {bpts[k].tolist()} (Levi on xi {mins[k]:.3g})"
        )
    return scan.minimum, float(mins[k])


def _min_eig(M):
    w, V = np.linalg.eigh(M)
    return w[:, 0], V[:, :, 0]


def df_search(S, domain: DomainSpec, psi: PolyField, cfg: SearchConfig | None = None) -> DFCertificate:
    """Search the ``(A, η)`` ladder for a pair certified on collar samples.

    ``η`` runs from large to small; for each ``η`` the smallest certified
    ``A`` is taken.  Raises :class:`SearchExhausted` with the worst sample
    when nothing certifies.
    """
    cfg = cfg or SearchConfig()
    pts = domain.collar_samples(cfg.n_samples, [cfg.seed, 0], cfg.inner_fraction)
    psi_min, bmin = check_preconditions(S, domain, psi, cfg, pts)
    data = CollarData.compute(S, domain.r, psi, pts)
    worst = (math.inf, None, None)
    ladder = []
    for eta in sorted(cfg.eta_ladder, reverse=True):
        for A in cfg.A_ladder:
            lam, vec = _min_eig(data.d_matrix(A, eta))
            k = int(np.argmin(lam))
            ladder.append({"A": float(A), "eta": float(eta), "min_D": float(lam[k])})
            if lam[k] <= cfg.margin:
                if lam[k] < worst[0] or worst[1] is None:
                    worst = (float(lam[k]), (A, eta), pts[k])
                continue
            cert = _certify(S, domain, psi, data, A, eta, cfg, lam, vec)
            cert.psi_levi_min = psi_min
            cert.boundary_levi_min = bmin
            cert.ladder = ladder
            if cert.passed:
                return cert
    raise SearchExhausted(
        f"no (A, eta) certified; worst min D = {worst[0]:.3g} at (A, eta) = {worst[1]}, "
        f"point {None if worst[2] is None else worst[2].tolist()}"
    )


def _certify(S, domain, psi, data: CollarData, A, eta, cfg, lam, vec) -> DFCertificate:
    rho = RhoField(domain.r, psi, A, eta)
    G_rho = rho_levi_matrix(S, rho, data.points)
    direct_min, _ = _min_eig(G_rho)
    formula = data.levi_factor(A, eta)[:, None, None] * data.d_matrix(A, eta)
    dirs = data.directions(np.random.default_rng([cfg.seed, 2]))
    fvals = np.einsum("nki,nij,nkj->nk", dirs, formula, dirs)
    dvals = np.einsum("nki,nij,nkj->nk", dirs, G_rho, dirs)
    scale = np.linalg.norm(formula, ord=2, axis=(-2, -1))[:, None]
    gap = float(np.max(np.abs(fvals - dvals) / scale))
    half, _ = _min_eig(data.d_matrix(A, eta / 2))
    terms = [DTerms(*(float(v @ M[k] @ v) for M in data.term_matrices(A, eta)))
             for k, v in enumerate(vec)]
    k = int(np.argmin(lam))
    passed = bool(lam[k] > cfg.margin and np.min(direct_min) > cfg.margin and gap < cfg.rel_gap)
    return DFCertificate(
        A=float(A), eta=float(eta), collar=domain.t0, n_samples=len(data.points),
        min_D=float(lam[k]), min_levi_rho=float(np.min(direct_min)), agreement_gap=gap,
        seed=cfg.seed, passed=passed, eta_half_min_D=float(np.min(half)),
        eta_half_pass=bool(np.min(half) > cfg.margin), margin=cfg.margin,
        worst_point=data.points[k].tolist(), samples=data.points, terms=terms,
    )


def recheck_certificate(S, domain: DomainSpec, psi: PolyField, cert: DFCertificate,
                        count: int = 200, seed=None) -> float:
    """Minimum direct Levi value of ``ρ`` on fresh collar samples."""
    seed = [cert.seed, 99] if seed is None else seed
    pts = domain.collar_samples(count, seed)
    rho = RhoField(domain.r, psi, cert.A, cert.eta)
    w, _ = _min_eig(rho_levi_matrix(S, rho, pts))
    return float(np.min(w))


@dataclass
class RhoJet:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def rho_eval(domain: DomainSpec, psi: PolyField, A: float, eta: float, p, h: float | None = None) -> RhoJet:
    """``ρ(p)`` with central-difference first and second derivatives."""
    rho = RhoField(domain.r, psi, A, eta)
    p = np.asarray(p)
    x = to_real(p) if np.iscomplexobj(p) or p.shape[-1] == domain.n else np.asarray(p, dtype=float)
    rv = float(domain.r.evaluate_real(x))
    if rv >= 0:
        raise OutsideDomain(f"r(p) = {rv:.3g} >= 0")
    if h is None:
        h = min(1e-4, 0.1 * float(rho.safe_step(x)))
    m = x.size
    E = np.eye(m) * h
    f0 = float(rho.evaluate_real(x))
    grad = np.array([(rho.evaluate_real(x + e) - rho.evaluate_real(x - e)) / (2 * h) for e in E])
    H = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            H[i, j] = (
                rho.evaluate_real(x + E[i] + E[j]) - rho.evaluate_real(x + E[i] - E[j])
                - rho.evaluate_real(x - E[i] + E[j]) + rho.evaluate_real(x - E[i] - E[j])
            ) / (4 * h * h)
    return RhoJet(f0, grad, H)


def exhaustion_ray_check(domain: DomainSpec, psi: PolyField, A: float, eta: float, p,
                         steps: int = 40) -> tuple:
    """``ρ`` along the segment from ``p`` to its projection on ``r = 0``.

    Returns ``(increasing, last value)``; the last sample has ``r ≈ -1e-12``.
    """
    rho = RhoField(domain.r, psi, A, eta)
    x = np.atleast_2d(np.asarray(p, dtype=float))
    b = project_to_level(domain.r, x, 0.0)[0]
    s = 1.0 - np.geomspace(1.0, 1e-12, steps)
    seg = x[0] + s[:, None] * (b - x[0])
    seg = seg[domain.r.evaluate_real(seg) < 0]
    vals = rho.evaluate_real(seg)
    return bool(np.all(np.diff(vals) >= -1e-14)), float(vals[-1])


# -- symplectic form ----------------------------------------------------------
@dataclass
class SymplecticSample:
    point: list
    omega: list  # ω_u on coordinate pairs, 2n x 2n
    tameness_min: float
    closedness_residual: float
    flagged: bool

    def to_dict(self):
        return {
            "point": self.point,
            "omega": self.omega,
            "tameness_min": self.tameness_min,
            "closedness_residual": self.closedness_residual,
            "flagged": self.flagged,
        }


def _omega(S, u, x):
    G, J, Om = levi_matrix(S, u, x, _eps_for(u, x))
    return -Om, G


def symplectic_check(S, u, points, margin: float = 1e-6, h: float = 1e-3) -> List[SymplecticSample]:
    """``ω_u = -d(J^*du)`` at sample points with tameness and closedness.

    ``min_v ω_u(v, Jv)`` over unit ``v`` is the smallest eigenvalue of the
    Levi matrix.  ``dω_u`` is estimated on coordinate triples by central
    differences of ``ω_u`` with step ``h`` (shrunk near ``bΩ`` for ``ρ``);
    the residual is divided by ``max(1, max |∂_k ω_ij|)``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    N, m = x.shape
    om, G = _omega(S, u, x)
    tame = np.linalg.eigvalsh(G)[:, 0]
    step = np.full(N, h)
    if hasattr(u, "safe_step"):
        step = np.minimum(step, 2.0 * u.safe_step(x))
    dom = np.zeros((N, m, m, m))  # dom[:, k] = ∂_k ω
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        plus, _ = _omega(S, u, x + step[:, None] * e)
        minus, _ = _omega(S, u, x - step[:, None] * e)
        dom[:, k] = (plus - minus) / (2 * step[:, None, None])
    res = np.zeros(N)
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(j + 1, m):
                val = dom[:, i, j, k] + dom[:, j, k, i] + dom[:, k, i, j]
                res = np.maximum(res, np.abs(val))
    res /= np.maximum(1.0, np.max(np.abs(dom), axis=(1, 2, 3)))
    return [
        SymplecticSample(x[i].tolist(), om[i].tolist(), float(tame[i]), float(res[i]),
                         bool(tame[i] <= margin))
        for i in range(N)
    ]
