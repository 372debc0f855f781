"""J-holomorphic discs through a point in a direction.

The disc is sought as ``z = h + T(g)`` with ``h(ζ) = p' + c' ζ`` holomorphic
and ``g = -Q(z) conj(z_ζ)``, so that ``z_ζ̄ + Q(z) z̄_ζ̄ = 0``.  For fixed
``h`` the Picard map is a contraction when ``Q`` is small; an outer Newton
loop on ``(p', c')`` enforces ``z(0) = p`` and ``dz(0)(∂/∂Re ζ) = v``.

Series arithmetic is exact up to truncation at total degree ``K`` in
``(ζ, ζ̄)``.  The residual reported on a disc is evaluated pointwise on the
polar grid with ``Q`` computed directly from its polynomial entries, so
truncation shows up in it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from ..errors import IllConditioned, NoConvergence, OutOfChart
from . import series as ser
from .grid import DiscGrid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscConfig:
    n_r: int = 32
    n_theta: int = 64
    degree: int = 16
    tol: float = 1e-8
    match_tol: float = 1e-8
    picard_tol: float = 1e-10
    max_picard: int = 50
    max_newton: int = 10
    fd_step: float = 1e-7

    @property
    def grid(self) -> DiscGrid:
        return DiscGrid(self.n_r, self.n_theta)


@dataclass
class Disc:
    grid: DiscGrid
    coeffs: np.ndarray  # (K+1, K+1, n) series coefficients
    center: np.ndarray
    direction: np.ndarray
    residual: float
    match_error: float
    picard_counts: List[int] = field(default_factory=list)
    picard_steps: List[List[float]] = field(default_factory=list)
    newton_count: int = 0

    @property
    def n(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __call__(self, zeta):
        return ser.evaluate(self.coeffs, zeta)

    @property
    def values(self) -> np.ndarray:
        """Node values, shape ``(n_r, n_theta, n)``."""
        return self(self.grid.nodes)

    def boundary_values(self) -> np.ndarray:
        return self(self.grid.boundary_nodes)

    def d_zeta(self, zeta):
        return ser.evaluate(ser.d_zeta(self.coeffs), zeta)

    def d_zetabar(self, zeta):
        return ser.evaluate(ser.d_zetabar(self.coeffs), zeta)

    def to_dict(self, jet=None):
        vals = self.values
        out = {
            "grid": self.grid.to_dict(),
            "degree": self.degree,
            "center": _cvec(self.center),
            "direction": _cvec(self.direction),
            "residual": self.residual,
            "match_error": self.match_error,
            "newton_iterations": self.newton_count,
            "picard_iterations": list(self.picard_counts),
            "nodes": [
                {
                    "r": float(self.grid.radii[i]),
                    "theta": float(self.grid.thetas[m]),
                    "z": _cvec(vals[i, m]),
                }
                for i in range(self.grid.n_r)
                for m in range(self.grid.n_theta)
            ],
        }
        if jet is not None:
            out["jet"] = {k: _cvec(v) for k, v in jet.items()}
        return out

    def csv_rows(self):
        vals = self.values
        for i in range(self.grid.n_r):
            for m in range(self.grid.n_theta):
                row = [self.grid.thetas[m], self.grid.radii[i]]
                for c in vals[i, m]:
                    row += [c.real, c.imag]
                yield row


def _cvec(v):
    return [[float(c.real), float(c.imag)] for c in np.atleast_1d(v)]


def eq1_residual(S, coeffs: np.ndarray, zeta) -> np.ndarray:
    """``|z_ζ̄ + Q(z) conj(z_ζ)|`` (max over components) at points ``zeta``."""
    z = ser.evaluate(coeffs, zeta)
    zz = ser.evaluate(ser.d_zeta(coeffs), zeta)
    zb = ser.evaluate(ser.d_zetabar(coeffs), zeta)
    res = zb + np.einsum("...ij,...j->...i", S.q(z), np.conj(zz))
    return np.max(np.abs(res), axis=-1)


def _picard(S, h, z0, cfg: DiscConfig):
    """Fixed point of ``z -> h + T(-Q(z) conj(z_ζ))``."""
    K = cfg.degree
    n = S.n
    z = z0.copy()
    steps = []
    if S.is_standard():
        return h.copy(), [0.0], 1
    for it in range(1, cfg.max_picard + 1):
        comps = [z[:, :, i] for i in range(n)]
        conj_comps = [ser.conj(c) for c in comps]
        cache = {}
        dz_conj = [ser.conj(ser.d_zeta(c)) for c in comps]
        new = h.copy()
        for i in range(n):
            g = np.zeros((K + 1, K + 1), dtype=complex)
            for j in range(n):
                entry = S.Q[i][j]
                if entry.is_zero():
                    continue
                qij = ser.compose_field(entry, comps, conj_comps, K, cache)
                g -= ser.mul(qij, dz_conj[j], K)
            new[:, :, i] += ser.cauchy_green(g)
        step = ser.l1_norm(new - z)
        steps.append(step)
        z = new
        if not np.isfinite(step):
            break
        if step < cfg.picard_tol:
            return z, steps, it
    raise NoConvergence(
        f"Picard iteration did not converge in {cfg.max_picard} steps "
        f"(last step {steps[-1]:.3g}); shrink the structure"
    )


def _interp_error(z, p, v):
    return np.concatenate([z[0, 0] - p, z[1, 0] + z[0, 1] - v])


def _pack(x):
    return np.concatenate([x.real, x.imag])


def _unpack(x):
    m = x.size // 2
    return x[:m] + 1j * x[m:]


def solve_disc(S, p, v, cfg: DiscConfig | None = None) -> Disc:
    """Solve for the disc with ``z(0) = p`` and ``dz(0)(e_1) = v``."""
    cfg = cfg or DiscConfig()
    n = S.n
    p = np.asarray(p, dtype=complex).reshape(n)
    v = np.asarray(v, dtype=complex).reshape(n)
    if np.linalg.norm(p) > S.radius:
        raise OutOfChart("disc centre outside the chart")
    K = cfg.degree
    grid = cfg.grid

    def make_h(params):
        h = np.zeros((K + 1, K + 1, n), dtype=complex)
        h[0, 0] = params[:n]
        h[1, 0] = params[n:]
        return h

    params = np.concatenate([p, v])
    target = np.concatenate([p, v])
    z = make_h(params)
    counts, all_steps = [], []
    z, steps, it = _picard(S, make_h(params), z, cfg)
    counts.append(it)
    all_steps.append(steps)
    F = _pack(_interp_error(z, p, v))
    jac = None
    newton = 0
    while np.max(np.abs(F)) > cfg.match_tol:
        if newton >= cfg.max_newton:
            raise NoConvergence(f"Newton matching failed: error {np.max(np.abs(F)):.3g}")
        if jac is None:
            # chord Newton: Jacobian by forward differences, computed once
            base = _pack(params)
            jac = np.zeros((base.size, base.size))
            for k in range(base.size):
                pert = base.copy()
                pert[k] += cfg.fd_step
                zk, _, _ = _picard(S, make_h(_unpack(pert)), z, cfg)
                jac[:, k] = (_pack(_interp_error(zk, p, v)) - F) / cfg.fd_step
        params = _unpack(_pack(params) - np.linalg.solve(jac, F))
        z, steps, it = _picard(S, make_h(params), z, cfg)
        counts.append(it)
        all_steps.append(steps)
        F = _pack(_interp_error(z, p, v))
        newton += 1

    extent = max(
        np.max(np.linalg.norm(ser.evaluate(z, grid.nodes), axis=-1)),
        np.max(np.linalg.norm(ser.evaluate(z, grid.boundary_nodes), axis=-1)),
    )
    if extent > S.radius:
        raise OutOfChart(f"disc leaves the chart (max |z| = {extent:.3g})")
    residual = float(np.max(eq1_residual(S, z, grid.nodes)))
    return Disc(
        grid=grid,
        coeffs=z,
        center=p,
        direction=v,
        residual=residual,
        match_error=float(np.max(np.abs(F))),
        picard_counts=counts,
        picard_steps=all_steps,
        newton_count=newton,
    )


JET_DEGREE = 4


def disc_jet(disc: Disc, radius: float = 0.2, min_nodes: int | None = None):
    """Least-squares 2-jet ``z ≈ p + t ζ + t̄' ζ̄ + a ζ² + b ζ̄² + c ζ ζ̄``.

    The fit runs over grid nodes with ``|ζ| <= radius`` and includes all
    monomials up to degree 4 so that higher-order terms do not leak into
    the quadratic coefficients.  Returns a dict with keys ``p, t, tbar, a, b, c``.
    """
    nodes = disc.grid.nodes
    mask = np.abs(nodes) <= radius
    pts = nodes[mask]
    monos = [(j, k) for d in range(JET_DEGREE + 1) for j in range(d + 1) for k in [d - j]]
    need = min_nodes or 2 * len(monos)
    if pts.size < need:
        raise IllConditioned(f"only {pts.size} nodes inside radius {radius}")
    V = np.stack([pts**j * np.conj(pts) ** k for j, k in monos], axis=1)
    if np.linalg.cond(V) > 1e12:
        raise IllConditioned("jet fit matrix is ill conditioned")
    vals = disc(pts)
    sol, *_ = np.linalg.lstsq(V, vals, rcond=None)
    idx = {mk: i for i, mk in enumerate(monos)}
    return {
        "p": sol[idx[(0, 0)]],
        "t": sol[idx[(1, 0)]],
        "tbar": sol[idx[(0, 1)]],
        "a": sol[idx[(2, 0)]],
        "b": sol[idx[(0, 2)]],
        "c": sol[idx[(1, 1)]],
    }


def five_point_laplacian(func: Callable, h: float = 0.05) -> float:
    """``Δ func(0)`` from the five-point stencil at radii ``h`` and ``h/2``
    with one Richardson step."""

    def lap(s):
        vals = func(np.array([s, -s, 1j * s, -1j * s, 0.0]))
        return (np.sum(vals[:4]) - 4.0 * vals[4]) / s**2

    return float(np.real((4.0 * lap(h / 2) - lap(h)) / 3.0))


def laplacian_along_disc(disc: Disc, f, h: float = 0.05) -> float:
    """``Δ(f ∘ z)(0)`` for a real field ``f`` with ``evaluate``."""
    return five_point_laplacian(lambda zeta: f.evaluate(disc(zeta)), h)


def jet_laplacian(jet, f) -> float:
    """``4 ∂²(f∘z)/∂ζ∂ζ̄ (0)`` for the 2-jet of a disc (exact series algebra)."""
    n = len(jet["p"])
    K = 2
    coeffs = np.zeros((K + 1, K + 1, n), dtype=complex)
    coeffs[0, 0] = jet["p"]
    coeffs[1, 0] = jet["t"]
    coeffs[0, 1] = jet["tbar"]
    coeffs[2, 0] = jet["a"]
    coeffs[0, 2] = jet["b"]
    coeffs[1, 1] = jet["c"]
    comps = [coeffs[:, :, i] for i in range(n)]
    comp = ser.compose_field(f, comps, [ser.conj(c) for c in comps], K, {})
    return float(4.0 * comp[1, 1].real)


def circle_means(disc: Disc, f) -> np.ndarray:
    """Mean of ``f ∘ z`` over each grid ring."""
    vals = f.evaluate(disc.values)
    return np.real(np.mean(vals, axis=1))
