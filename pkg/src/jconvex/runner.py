"""Scenario execution and report assembly.

A report is a JSON document that depends only on the scenario (and its
seed): wall-clock timings go to a separate sidecar file so that reports of
repeated runs compare byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np

from . import __version__
from .config import (
    ContactTask,
    DFSearchTask,
    DiscTask,
    DomainConfig,
    HartogsTask,
    LeviTask,
    NormalizeTask,
    PshScanTask,
    PsiConfig,
    Scenario,
    StructureConfig,
    SymplecticTask,
    Term,
    load_scenario,
)
from .contact import level_set_approximation
from .discs.solver import DiscConfig, disc_jet, solve_disc
from .discs.sweep import hartogs_sweep, shell_family
from .errors import (
    IllConditioned,
    JConvexError,
    MissingSection,
    PreconditionFailed,
    SearchExhausted,
    TaskFailed,
)
from .exhaustion import (
    DomainSpec,
    RhoField,
    SearchConfig,
    df_search,
    recheck_certificate,
    symplectic_check,
    uniform_ball,
)
from .levi import levi_report, psh_scan
from .normalization import (
    disc_jet_c,
    disc_transport_residual,
    fd_q_derivatives,
    levi_in_adapted_coords,
    normalize_at_origin,
)
from .polyfield import PolyField, to_complex, to_real
from .structure import StructureField

log = logging.getLogger(__name__)

TOOL = "jconvex"
TASK_STREAM = 1000


# -- building objects from config ---------------------------------------------
def poly_from_terms(n: int, terms: List[Term], real: bool = False) -> PolyField:
    d: Dict[tuple, complex] = {}
    for t in terms:
        key = (tuple(t.z), tuple(t.zbar))
        d[key] = d.get(key, 0) + complex(t.re, t.im)
    return PolyField(n, d, real=real)


def build_structure(cfg: StructureConfig, n: int, seed: int) -> StructureField:
    if cfg.kind == "standard":
        return StructureField.standard(n, cfg.radius)
    if cfg.kind == "terms":
        entries = {(e.i, e.j): poly_from_terms(n, e.terms) for e in cfg.entries}
        return StructureField.from_entries(n, entries, cfg.radius)
    if cfg.kind == "zbar_linear":
        entry = PolyField.zbar(n, cfg.k) * cfg.coeff
        return StructureField.from_entries(n, {(cfg.i, cfg.j): entry}, cfg.radius)
    factor = poly_from_terms(n, cfg.factor) if cfg.factor else None
    return StructureField.random(n, [seed, 7, cfg.seed_offset], cfg.bound, cfg.degree, cfg.radius,
                                 cfg.min_degree, factor)


def build_domain(cfg: DomainConfig, n: int) -> DomainSpec:
    if cfg.kind == "ball":
        d = DomainSpec.ball(n)
    elif cfg.kind == "egg":
        d = DomainSpec.egg(cfg.m)
    elif cfg.kind == "shell":
        d = DomainSpec.shell(n)
    else:
        d = DomainSpec(poly_from_terms(n, cfg.terms, real=True), "poly")
    chart = d.chart_radius if cfg.chart_radius is None else cfg.chart_radius
    bound = d.bound if cfg.bound is None else cfg.bound
    return DomainSpec(d.r, d.name, chart, bound, cfg.collar_depth)


def build_psi(cfg: PsiConfig, n: int) -> PolyField:
    if cfg.kind == "norm_squared":
        return PolyField.norm_squared(n)
    return poly_from_terms(n, cfg.terms, real=True)


# -- reports ------------------------------------------------------------------
def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


@dataclass
class Context:
    scenario: Scenario
    S: StructureField
    domain: DomainSpec
    psi: PolyField
    workers: int = 1
    state: dict = field(default_factory=dict)

    def rng(self, idx: int):
        return np.random.default_rng([self.scenario.seed, idx])

    def seed(self, idx: int):
        # library routines draw from [seed, 0..9]; task streams stay clear of them
        return [self.scenario.seed, TASK_STREAM, idx]


def _task_disc(ctx: Context, t: DiscTask, idx: int):
    n = ctx.scenario.n
    p = np.array([complex(*c) for c in t.p])
    v = np.array([complex(*c) for c in t.v])
    disc = solve_disc(ctx.S, p, v, DiscConfig(t.n_r, t.n_theta, t.degree))
    try:
        jet, jet_error = disc_jet(disc), None
    except IllConditioned as exc:  # coarse grids: too few nodes near the centre
        jet, jet_error = None, str(exc)
    out = disc.to_dict(jet) if t.dump_nodes else {
        k: val for k, val in disc.to_dict(jet).items() if k != "nodes"
    }
    if jet_error:
        out["jet_error"] = jet_error
    out["picard_steps"] = disc.picard_steps
    passed = disc.residual < t.tol and disc.match_error < t.tol
    return out, passed


def _task_levi(ctx: Context, t: LeviTask, idx: int):
    rng = ctx.rng(idx)
    n = ctx.scenario.n
    f = build_psi(t.f, n)
    pts = uniform_ball(rng, t.n_samples, n, t.point_radius * ctx.S.radius)
    vecs = rng.standard_normal((t.n_samples, 2 * n))
    rep = levi_report(ctx.S, f, pts, vecs, workers=ctx.workers)
    out = rep.summary()
    out["records"] = [r.__dict__ for r in rep.records]
    return out, rep.max_gap < t.tol


def _task_psh(ctx: Context, t: PshScanTask, idx: int):
    rng = ctx.rng(idx)
    n = ctx.scenario.n
    u = build_psi(t.u, n)
    pts = uniform_ball(rng, t.n_points, n, t.radius)
    extra = []
    for k in range(n):
        # samples on the coordinate hyperplanes z_k = 0
        z = to_complex(pts[: max(1, t.n_points // 10)]).copy()
        z[:, k] = 0
        extra.append(to_real(z))
    res = psh_scan(ctx.S, u, np.vstack([pts] + extra), t.margin)
    passed = t.expect is None or res.classification == t.expect
    return res.to_dict(), passed


def _task_normalize(ctx: Context, t: NormalizeTask, idx: int):
    S = ctx.S
    F, S2 = normalize_at_origin(S)
    dz, dzb = fd_q_derivatives(S2.q, S.n)
    zero = np.zeros(S.n, dtype=complex)
    direction = np.array(t.direction)
    c_norm = float(np.max(np.abs(disc_jet_c(S2, direction))))
    L_J, L_std, gap = levi_in_adapted_coords(S2, ctx.psi, direction)
    p = np.full(S.n, 0.05 + 0.02j)
    transport = disc_transport_residual(S, F, p, to_complex(0.1 * direction))
    out = {
        "phi": F.to_dict(),
        "q0": float(np.max(np.abs(S2.q(zero)))),
        "max_fd_dz": float(np.max(np.abs(dz))),
        "max_fd_dzbar": float(np.max(np.abs(dzb))),
        "c_normalized": c_norm,
        "levi": {"L_J": L_J, "L_std": L_std, "gap": gap},
        "transport_residual": transport,
    }
    passed = out["q0"] < 1e-10 and out["max_fd_dz"] < 1e-6 and gap < t.tol and transport < 1e-6
    return out, passed


def _task_df(ctx: Context, t: DFSearchTask, idx: int):
    cfg = SearchConfig(
        n_samples=t.n_samples, n_boundary=t.n_boundary, seed=ctx.scenario.seed,
        margin=t.margin, A_ladder=tuple(t.A_ladder), eta_ladder=tuple(t.eta_ladder),
    )
    try:
        cert = df_search(ctx.S, ctx.domain, ctx.psi, cfg)
    except (PreconditionFailed, SearchExhausted) as exc:
        out = {"error": type(exc).__name__, "detail": str(exc)}
        return out, t.expect_failure
    ctx.state["certificate"] = cert
    out = cert.to_dict()
    passed = cert.passed
    if t.recheck_samples:
        fresh = recheck_certificate(ctx.S, ctx.domain, ctx.psi, cert, t.recheck_samples, ctx.seed(idx))
        out["recheck_min_levi_rho"] = fresh
        passed = passed and fresh > 0.5 * cert.margin
    return out, passed and not t.expect_failure


def _require_cert(ctx: Context):
    cert = ctx.state.get("certificate")
    if cert is None:
        raise TaskFailed("needs a certificate from an earlier df_search task")
    return cert


def _task_symplectic(ctx: Context, t: SymplecticTask, idx: int):
    if t.source == "certificate":
        cert = _require_cert(ctx)
        u = RhoField(ctx.domain.r, ctx.psi, cert.A, cert.eta)
        pts = cert.samples[: t.n_points]
    else:
        u = ctx.psi
        pts = uniform_ball(ctx.rng(idx), t.n_points, ctx.scenario.n, 0.9 * ctx.S.radius)
    samples = symplectic_check(ctx.S, u, pts)
    tame = min(s.tameness_min for s in samples)
    closed = max(s.closedness_residual for s in samples)
    out = {"tameness_min": tame, "closedness_max": closed, "n_points": len(samples),
           "flagged": sum(s.flagged for s in samples)}
    return out, tame > 0 and not any(s.flagged for s in samples)


def _task_hartogs(ctx: Context, t: HartogsTask, idx: int):
    if t.family == "shell":
        path = shell_family
    else:
        n = ctx.scenario.n
        e0 = np.zeros(n, dtype=complex)
        e0[0] = 1.0

        def path(s):
            return 0.7 * s * e0, 0.2 * e0

    sweep = hartogs_sweep(ctx.S, ctx.domain.r, path, np.linspace(0, 1, t.n_t))
    out = sweep.to_dict()
    errors = any(v.error for v in sweep.verdicts)
    if t.expect_figure:
        passed = sweep.exhibits_hartogs_figure
    else:
        passed = not errors and not any(
            v.boundary_inside and v.interior_outside for v in sweep.verdicts
        )
    return out, passed


def _task_contact(ctx: Context, t: ContactTask, idx: int):
    if t.A is not None and t.eta is not None:
        A, eta = t.A, t.eta
    else:
        cert = _require_cert(ctx)
        A, eta = cert.A, cert.eta
    pts = ctx.domain.boundary_samples(t.n_boundary, ctx.seed(idx))
    rec = level_set_approximation(ctx.S, ctx.domain, ctx.psi, A, eta, t.deltas, pts, k=t.k)
    out = rec.to_dict()
    out["A"], out["eta"] = A, eta
    ok = [lv for lv in rec.levels if lv.error is None]
    last = ok[-1] if ok else None
    passed = (
        len(ok) == len(rec.levels)
        and all(lv.contact_min > 0 and lv.sign_constant for lv in ok)
        and rec.confoliation_min >= -1e-6
        and last is not None
        and last.d0 < t.target
        and (t.k == 0 or last.d1 < t.target)
        and rec.monotone(0)
    )
    return out, passed


HANDLERS: Dict[str, Callable] = {
    "disc": _task_disc,
    "levi": _task_levi,
    "psh_scan": _task_psh,
    "normalize": _task_normalize,
    "df_search": _task_df,
    "symplectic": _task_symplectic,
    "hartogs": _task_hartogs,
    "contact": _task_contact,
}


def run_scenario(scenario: Scenario, workers: int = 1):
    """Run every task; returns ``(report, timings)``."""
    n = scenario.n
    S = build_structure(scenario.structure, n, scenario.seed)
    S.validate()
    ctx = Context(scenario, S, build_domain(scenario.domain, n), build_psi(scenario.psi, n), workers)
    tasks, timings = [], {}
    for idx, (name, task) in enumerate(zip(scenario.task_names(), scenario.tasks)):
        log.info("task %s (%s)", name, task.task)
        t0 = time.perf_counter()
        try:
            result, passed = HANDLERS[task.task](ctx, task, idx)
            status = "pass" if passed else "fail"
        except JConvexError as exc:
            result, status = {"error": type(exc).__name__, "detail": str(exc)}, "error"
        timings[name] = time.perf_counter() - t0
        log.info("task %s: %s (%.2fs)", name, status, timings[name])
        tasks.append({"name": name, "task": task.task, "status": status, "result": result})
    report = {
        "tool": TOOL,
        "version": __version__,
        "scenario": scenario.name,
        "seed": scenario.seed,
        "config": scenario.model_dump(mode="json"),
        "tasks": tasks,
        "passed": all(t["status"] == "pass" for t in tasks),
    }
    return _clean(report), timings


def run_config(path, out_dir=None, workers: int = 1):
    """Load, run, and write ``<name>.report.json`` (+ ``.timings.json``)."""
    scenario = load_scenario(resolve_config(path))
    report, timings = run_scenario(scenario, workers)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{scenario.name}.report.json").write_text(dumps(report))
        (out / f"{scenario.name}.timings.json").write_text(
            json.dumps({k: round(v, 6) for k, v in timings.items()}, indent=2) + "\n"
        )
    return report, timings


# -- bundled scenarios -------------------------------------------------------------
def bundled_scenarios() -> List[str]:
    root = resources.files("jconvex") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config(path) -> Path:
    """A file path, or the name of a bundled scenario (with or without ``.json``)."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.name.endswith(".json") else p.name + ".json"
    if name in bundled_scenarios():
        with resources.as_file(resources.files("jconvex") / "scenarios" / name) as f:
            return Path(f)
    return p


# -- plot data ------------------------------------------------------------------
def _csv(header_comment: str, columns: List[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def _plot_disc(res):
    n = len(res["center"])
    cols = ["r", "theta"] + [f"{part}{i}" for i in range(n) for part in ("re", "im")]
    rows = ([nd["r"], nd["theta"]] + [c for pair in nd["z"] for c in pair] for nd in res["nodes"])
    return _csv("disc node values: radius, angle, real/imag part of each component", cols, rows)


def _plot_df(res):
    rows = ([e["A"], e["eta"], e["min_D"]] for e in res.get("ladder", []))
    return _csv("ladder of (A, eta) with the minimum of D over samples", ["A", "eta", "min_D"], rows)


def _plot_contact(res):
    rows = ([lv["delta"], lv["contact_min"], lv["d0"], lv["d1"]] for lv in res["levels"])
    return _csv("per level: delta, min |alpha^(d alpha)^(n-1)|, C0 and C1 distances",
                ["delta", "contact_min", "c0_distance", "c1_distance"], rows)


def _plot_levi(res):
    recs = res["records"]
    m = len(recs[0]["point"]) if recs else 0
    cols = [f"p{i}" for i in range(m)] + [f"t{i}" for i in range(m)] + ["L_direct", "L_disc", "gap"]
    rows = (r["point"] + r["direction"] + [r["L_direct"], r["L_disc"], r["gap"]] for r in recs)
    return _csv("Levi form by circulation and by discs", cols, rows)


def _plot_hartogs(res):
    rows = ([v["t"], v["max_r_interior"], v["max_r_boundary"], int(v["contained"])]
            for v in res["verdicts"])
    return _csv("per parameter: max of r on interior nodes and on the boundary",
                ["t", "max_r_interior", "max_r_boundary", "contained"], rows)


PLOTTERS = {
    "disc": _plot_disc,
    "df_search": _plot_df,
    "contact": _plot_contact,
    "levi": _plot_levi,
    "hartogs": _plot_hartogs,
}


def emit_plotdata(report: dict, section: str, out_dir=".") -> Path:
    """Write the CSV for the task named ``section``; returns the path."""
    for t in report.get("tasks", []):
        if t["name"] == section:
            plot = PLOTTERS.get(t["task"])
            if plot is None or "error" in t["result"]:
                raise MissingSection(f"section {section!r} has no plot data")
            if t["task"] == "disc" and "nodes" not in t["result"]:
                raise MissingSection(f"section {section!r} was run without node dump")
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"{report['scenario']}.{section}.csv"
            path.write_text(plot(t["result"]))
            return path
    raise MissingSection(f"no section {section!r} in report")
