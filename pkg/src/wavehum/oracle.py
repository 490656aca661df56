"""Independent references: three-grid refinement studies and the glued standing wave.

Nothing here touches the time-stepping kernel; refinement studies only call
the pipeline extractors at successive resolutions and post-process scalars.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded


def standing_wave_profile(points, mode, lo=(0.0,), hi=(1.0,)):
    """prod_i sin(k pi (x_i - lo_i) / L_i) at points of shape (P, d) or a single point."""
    pts = np.atleast_2d(np.asarray(points, float))
    lo = np.broadcast_to(np.asarray(lo, float), (pts.shape[1],))
    hi = np.broadcast_to(np.asarray(hi, float), (pts.shape[1],))
    out = np.ones(len(pts))
    for i in range(pts.shape[1]):
        out *= np.sin(mode * math.pi * (pts[:, i] - lo[i]) / (hi[i] - lo[i]))
    return out


def standing_wave_field(points, t, mode, c=1.0, lo=(0.0,), hi=(1.0,)):
    """Glued-interface standing wave profile(x) cos(k pi c t |1/L|) for A = c^2 I; points (P, d)."""
    pts = np.atleast_2d(np.asarray(points, float))
    lo = np.broadcast_to(np.asarray(lo, float), (pts.shape[1],))
    hi = np.broadcast_to(np.asarray(hi, float), (pts.shape[1],))
    omega = mode * math.pi * c * math.sqrt(float(np.sum(1.0 / (hi - lo) ** 2)))
    return standing_wave_profile(pts, mode, lo, hi) * math.cos(omega * t)


def standing_wave_reference(x, t, mode, c=1.0, lo=(0.0,), hi=(1.0,)):
    """Value at a single point ``x`` (scalar in 1D or a length-d sequence)."""
    pt = np.atleast_1d(np.asarray(x, float)).reshape(1, -1)
    return float(standing_wave_field(pt, t, mode, c, lo, hi)[0])


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    resolutions: list
    values: list
    coarse: float
    fine: float
    extrapolated: float
    observed_order: float
    applicable: bool
    monotone: bool


def three_grid_order(f1, f2, f3):
    """(order, extrapolated, monotone) from values on grids h, h/2, h/4.

    The order is reported only when successive differences keep their sign and
    shrink; otherwise NaN.
    """
    d1, d2 = f1 - f2, f2 - f3
    if d1 == 0.0 or d2 == 0.0 or np.sign(d1) != np.sign(d2) or abs(d2) >= abs(d1):
        return math.nan, math.nan, False
    p = math.log2(abs(d1) / abs(d2))
    return p, f3 - d2 / (2.0**p - 1.0), True


def refine_study(scenario, quantity, levels=3, base_resolution=None, budget_seconds=None, extractor=None):
    """Evaluate a named scalar at resolutions r, 2r, 4r, ...; fit an order from the last three."""
    if levels < 3:
        raise ValueError("a refinement study needs at least three levels")
    from .pipelines import QUANTITIES, build_setup

    fn = extractor if extractor is not None else QUANTITIES[quantity]
    r0 = base_resolution or scenario.domain.resolution
    resolutions = [r0 * 2**i for i in range(levels)]
    values = []
    start = time.perf_counter()
    T = None
    for r in resolutions:
        setup = build_setup(scenario, resolution=r, T=T)
        T = setup.T  # same final time on every level
        values.append(float(fn(setup)))
        elapsed = time.perf_counter() - start
        if budget_seconds is not None and elapsed > budget_seconds and r != resolutions[-1]:
            raise BudgetExceeded(f"refinement study exceeded {budget_seconds:.0f}s after resolution {r}")
    if all(v == 0.0 for v in values):
        return OracleReport(quantity, resolutions, values, 0.0, 0.0, 0.0, math.nan, False, False)
    p, ext, mono = three_grid_order(*values[-3:])
    return OracleReport(quantity, resolutions, values, values[0], values[-1], ext, p, True, mono)


def write_oracle_csv(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("quantity,resolution,value\n")
        for r, v in zip(report.resolutions, report.values):
            fh.write(f"{report.quantity},{r},{v:.17g}\n")
        fh.write(
            f"# coarse={report.coarse:.17g} fine={report.fine:.17g} extrapolated={report.extrapolated:.17g} "
            f"observed_order={report.observed_order:.17g} applicable={report.applicable} monotone={report.monotone}\n"
        )
