"""Levi forms ``L^J_f(p; t) = -d(J^* df)(X, JX)`` by two independent routes.

* :func:`levi_direct` evaluates the 2-form by circulation around a small
  parallelogram (see :mod:`jconvex.forms`).
* :func:`levi_disc` solves a ``J``-holomorphic disc with ``z(0) = p`` and
  ``dz(0)(e_1) = t`` and returns ``Δ(f ∘ z)(0)``.

Normalization: ``L^{J_st}_{|z|^2}(p; e_1) = 4``.

Scalar fields are duck typed: anything with ``evaluate_real(x)`` and
``gradient(x)`` on real points ``(..., 2n)`` works (PolyField does).
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import List, Sequence

import numpy as np

from .discs.solver import DiscConfig, laplacian_along_disc, solve_disc
from .errors import OutOfChart, StructureInvalid, NonInvertible
from .forms import EPS_PAIR, jstar_covector, two_form_matrix, two_form_value
from .polyfield import to_complex, to_real
from .structure import j_matrix

DISC_SCALE = 0.05


def _as_real_points(p, n):
    p = np.asarray(p)
    if np.iscomplexobj(p) or p.shape[-1] == n:
        p = to_real(np.asarray(p, dtype=complex))
    return np.atleast_2d(np.asarray(p, dtype=float))


def _j_at(S, x):
    try:
        return j_matrix(S.q(to_complex(x)))
    except NonInvertible as exc:
        raise StructureInvalid(str(exc)) from exc


def _check_chart(S, x):
    if np.any(np.linalg.norm(x, axis=-1) > S.radius * (1 + 1e-12)):
        raise OutOfChart("point outside chart")


def levi_direct_batch(S, f, points, vectors, eps_pair=EPS_PAIR) -> np.ndarray:
    """Vectorized :func:`levi_direct`: ``points``/``vectors`` are real ``(N, 2n)``."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    X = np.atleast_2d(np.asarray(vectors, dtype=float))
    _check_chart(S, x)
    J = _j_at(S, x)
    JX = np.einsum("nij,nj->ni", J, X)
    return -two_form_value(jstar_covector(S, f), x, X, JX, eps_pair)


def levi_direct(S, f, p, t, eps_pair=EPS_PAIR) -> float:
    """Levi form at ``p`` (complex ``n`` vector) on the real tangent vector ``t``
    (real ``2n`` vector, block ordering)."""
    x = _as_real_points(p, S.n)
    return float(levi_direct_batch(S, f, x, np.atleast_2d(t), eps_pair)[0])


def levi_matrix(S, f, points, eps_pair=EPS_PAIR):
    """Symmetric ``G`` with ``L(p; X) = X^T G X``; also returns ``J`` and ``d(J^*df)``."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    _check_chart(S, x)
    J = _j_at(S, x)
    omega = two_form_matrix(jstar_covector(S, f), x, eps_pair)
    M = -omega @ J
    return 0.5 * (M + np.swapaxes(M, -1, -2)), J, omega


def levi_exact(S, f, p, t) -> float:
    """Levi form from exact polynomial derivatives (independent route)."""
    from .forms import d_jstar_exact

    x = _as_real_points(p, S.n)
    t = np.asarray(t, dtype=float)
    omega = d_jstar_exact(S, f, x)[0]
    J = _j_at(S, x)[0]
    return float(-t @ omega @ (J @ t))


def levi_disc(S, f, p, t, cfg: DiscConfig | None = None, scale: float = DISC_SCALE,
              stencil: float = 0.05) -> float:
    """``Δ(f ∘ z)(0)`` for the disc through ``p`` tangent to ``t``.

    The disc is solved for the rescaled direction ``s t`` with
    ``|s t| = scale`` (small discs keep the series short) and the result is
    divided by ``s**2``; the Levi form is quadratic in ``t``.
    """
    t = np.asarray(t, dtype=float)
    norm = np.linalg.norm(t)
    if norm == 0:
        return 0.0
    s = scale / norm
    p = np.asarray(p, dtype=complex) if np.iscomplexobj(p) or len(p) == S.n else to_complex(p)
    disc = solve_disc(S, p, to_complex(s * t), cfg)
    return laplacian_along_disc(disc, f, stencil) / s**2


@dataclass
class LeviRecord:
    point: list
    direction: list
    L_direct: float
    L_disc: float
    gap: float


@dataclass
class LeviReport:
    records: List[LeviRecord]
    config: dict = field(default_factory=dict)

    @property
    def max_gap(self) -> float:
        return max((r.gap for r in self.records), default=0.0)

    def summary(self) -> dict:
        return {
            "n_records": len(self.records),
            "max_gap": self.max_gap,
            "min_L_direct": min((r.L_direct for r in self.records), default=None),
            "min_L_disc": min((r.L_disc for r in self.records), default=None),
            "config": self.config,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.records:
            m = len(self.records[0].point)
            w.writerow([f"p{i}" for i in range(m)] + [f"t{i}" for i in range(m)]
                       + ["L_direct", "L_disc", "gap"])
        for r in self.records:
            w.writerow([repr(v) for v in r.point + r.direction + [r.L_direct, r.L_disc, r.gap]])
        return buf.getvalue()


def levi_report(S, f, points, vectors, cfg: DiscConfig | None = None, workers: int = 1) -> LeviReport:
    """Both Levi routes side by side at the given real points and vectors."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    direct = levi_direct_batch(S, f, points, vectors)

    def one(k):
        return levi_disc(S, f, to_complex(points[k]), vectors[k], cfg)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            disc_vals = list(ex.map(one, range(len(points))))
    else:
        disc_vals = [one(k) for k in range(len(points))]
    records = [
        LeviRecord(points[k].tolist(), vectors[k].tolist(), float(direct[k]),
                   float(disc_vals[k]), float(abs(direct[k] - disc_vals[k])))
        for k in range(len(points))
    ]
    return LeviReport(records, {"eps": list(EPS_PAIR), "disc": asdict(cfg or DiscConfig())})


@dataclass
class PshScanResult:
    minimum: float
    argmin_point: np.ndarray
    argmin_direction: np.ndarray
    classification: str  # "strictly-psh" | "psh" | "not-psh"
    per_point_min: np.ndarray
    failures: list = field(default_factory=list)

    def to_dict(self):
        return {
            "minimum": self.minimum,
            "argmin_point": self.argmin_point.tolist(),
            "argmin_direction": self.argmin_direction.tolist(),
            "classification": self.classification,
            "n_points": int(self.per_point_min.size),
            "failures": self.failures,
        }


def classify(minimum: float, margin: float) -> str:
    if minimum > margin:
        return "strictly-psh"
    if minimum >= -margin:
        return "psh"
    return "not-psh"


def psh_scan(S, u, points, margin: float = 1e-6, chunk: int = 256) -> PshScanResult:
    """Minimum of the Levi form of ``u`` over unit directions and sample points.

    At every point the minimum over all Euclidean unit directions is the
    smallest eigenvalue of the Levi matrix; its eigenvector is recorded.
    Points where the structure is invalid are skipped and listed.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    mins = np.full(len(x), np.inf)
    dirs = np.zeros_like(x)
    failures = []
    for start in range(0, len(x), chunk):
        sl = slice(start, start + chunk)
        try:
            G, _, _ = levi_matrix(S, u, x[sl])
        except (StructureInvalid, OutOfChart) as exc:
            failures.append({"chunk": start, "error": str(exc)})
            continue
        w, V = np.linalg.eigh(G)
        mins[sl] = w[:, 0]
        dirs[sl] = V[:, :, 0]
    k = int(np.argmin(mins))
    m = float(mins[k])
    return PshScanResult(m, x[k], dirs[k], classify(m, margin), mins, failures)


def xi_basis(J, grad) -> np.ndarray:
    """Orthonormal basis of ``ξ = ker dr ∩ ker J^*dr`` as columns, ``(N, 2n, 2n-2)``.

    ``J`` has shape ``(N, 2n, 2n)`` and ``grad`` (the gradient of ``r``) ``(N, 2n)``.
    """
    grad = np.atleast_2d(grad)
    rows = np.stack([grad, np.einsum("nji,nj->ni", J, grad)], axis=1)  # (N, 2, 2n)
    _, _, Vt = np.linalg.svd(rows)
    return np.swapaxes(Vt[:, 2:, :], -1, -2)


def levi_on_xi(S, r, points, eps_pair=EPS_PAIR):
    """Minimum of the Levi form of ``r`` over unit vectors of ``ξ`` at each point.

    Returns ``(minima, minimizing vectors)``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    G, J, _ = levi_matrix(S, r, x, eps_pair)
    B = xi_basis(J, r.gradient(x))
    R = np.swapaxes(B, -1, -2) @ G @ B
    w, V = np.linalg.eigh(R)
    return w[:, 0], np.einsum("nij,nj->ni", B, V[:, :, 0])
