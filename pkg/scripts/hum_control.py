"""Compute a HUM null control for a scenario and report the convergence history."""

import argparse
import time
from pathlib import Path

from wavehum.hum import solve_hum, verify_null
from wavehum.pipelines import build_setup, initial_data
from wavehum.scenario import load_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(SCENARIOS / "reference_1d.yaml"))
    ap.add_argument("--resolution", type=int)
    ap.add_argument("--method", default="cr", choices=("cr", "cg"))
    ap.add_argument("--filter-modes", type=int, help="overrides run.filter_modes")
    args = ap.parse_args()

    s = build_setup(load_scenario(args.config), resolution=args.resolution)
    run = s.scenario.run
    K = args.filter_modes if args.filter_modes is not None else run.filter_modes
    start = time.perf_counter()
    res = solve_hum(
        s.ops, s.regions, *initial_data(s), s.T, s.dt, tol=run.tol, max_iter=run.max_iter,
        T_min=s.budget.T_min, filter_modes=K, modes=s.modes(K) if K else None, method=args.method,
    )
    e_ratio, uT, vT = verify_null(res, s.ops)
    for i, (r, quad) in enumerate(res.cg_history):
        print(f"iter {i:>4}  residual {r:.3e}  quadratic form {quad:.6g}")
    print(f"ndof={s.ops.ndof} T={s.T:.4g} converged={res.converged} iterations={res.iterations}")
    print(f"e_ratio={e_ratio:.3e} |u(T)|={uT:.3e} |u'(T)|={vT:.3e} ({time.perf_counter() - start:.1f}s)")


if __name__ == "__main__":
    main()
