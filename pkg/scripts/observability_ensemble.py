"""Observed-energy to initial-energy ratios over a random low-mode ensemble, versus T."""

import argparse
from pathlib import Path

from wavehum.observability import low_mode_data, run_ensemble
from wavehum.pipelines import build_setup
from wavehum.scenario import load_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(SCENARIOS / "reference_1d.yaml"))
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--modes", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--factors", type=float, nargs="+", default=[0.1, 0.25, 0.5, 1.0, 1.2, 2.0])
    args = ap.parse_args()

    s = build_setup(load_scenario(args.config))
    data = low_mode_data(s.ops, args.size, args.modes, seed=args.seed, modes=s.modes(args.modes))
    print(f"T_min = {s.budget.T_min:.6g}")
    print(f"{'T/T_min':>8} {'median':>10} {'max':>10} {'spread':>8}")
    for f in args.factors:
        rep = run_ensemble(s.ops, s.regions, f * s.budget.T_min, s.dt, data=data, T_min=s.budget.T_min)
        print(f"{f:>8.2f} {rep.median_ratio:>10.4g} {rep.max_ratio:>10.4g} {rep.spread:>8.3f}")


if __name__ == "__main__":
    main()
