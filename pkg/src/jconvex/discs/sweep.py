"""Sampled one-parameter families of discs against a domain ``{r < 0}``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..errors import JConvexError
from .solver import Disc, DiscConfig, solve_disc

MARGIN = 1e-6


@dataclass
class SweepVerdict:
    t: float
    max_r_interior: float
    max_r_boundary: float
    contained: bool
    boundary_inside: bool
    interior_outside: bool
    touching: bool
    error: Optional[str] = None

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class HartogsSweep:
    ts: np.ndarray
    discs: List[Optional[Disc]]
    verdicts: List[SweepVerdict]
    margin: float = MARGIN

    @property
    def exhibits_hartogs_figure(self) -> bool:
        """Some disc lies in ``Ω`` while another has its boundary in ``Ω``
        but an interior node outside."""
        ok = [v for v in self.verdicts if v.error is None]
        return any(v.contained for v in ok) and any(
            v.boundary_inside and v.interior_outside for v in ok
        )

    @property
    def touching_events(self) -> List[float]:
        return [v.t for v in self.verdicts if v.touching]

    def to_dict(self):
        return {
            "margin": self.margin,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "exhibits_hartogs_figure": self.exhibits_hartogs_figure,
            "touching_events": self.touching_events,
        }


def hartogs_sweep(
    S,
    r,
    path: Callable[[float], tuple],
    ts=None,
    cfg: DiscConfig | None = None,
    margin: float = MARGIN,
    touch_tol: float = 1e-3,
) -> HartogsSweep:
    """Solve the disc ``path(t) = (p, v)`` or ``(p, v, radius)`` for each ``t``.

    ``radius`` rescales the direction (the disc ``ζ -> z(radius ζ)``).
    Interior values are taken at the grid nodes and the centre; boundary
    values on the unit circle.  Solver failures are recorded and the sweep
    continues.
    """
    ts = np.linspace(0.0, 1.0, 11) if ts is None else np.asarray(ts, dtype=float)
    discs, verdicts = [], []
    for t in ts:
        spec = path(float(t))
        p, v = spec[0], spec[1]
        scale = spec[2] if len(spec) > 2 else 1.0
        try:
            disc = solve_disc(S, p, np.asarray(v, dtype=complex) * scale, cfg)
        except JConvexError as exc:
            discs.append(None)
            verdicts.append(SweepVerdict(float(t), np.nan, np.nan, False, False, False, False,
                                         f"{type(exc).__name__}: {exc}"))
            continue
        inner = np.concatenate([disc.values.reshape(-1, disc.n), disc(np.zeros(1))])
        max_in = float(np.max(r.evaluate(inner)))
        max_bd = float(np.max(r.evaluate(disc.boundary_values())))
        boundary_inside = max_bd <= -margin
        verdicts.append(SweepVerdict(
            t=float(t),
            max_r_interior=max_in,
            max_r_boundary=max_bd,
            contained=bool(max(max_in, max_bd) < 0),
            boundary_inside=bool(boundary_inside),
            interior_outside=bool(max_in > 0),
            touching=bool(boundary_inside and -touch_tol < max_in <= 0),
        ))
        discs.append(disc)
    return HartogsSweep(ts, discs, verdicts, margin)


def shell_family(t: float):
    """Flat discs ``ζ -> (0.7 ζ, 0.4 + 0.2 t)`` for the shell ``1/4 < |z|^2 < 1``.

    Boundaries stay in the shell; the centre lies in the hole for ``t < 1/2``.
    """
    return np.array([0.0, 0.4 + 0.2 * t], dtype=complex), np.array([0.7, 0.0], dtype=complex)
