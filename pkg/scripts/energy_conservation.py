"""Energy drift of the homogeneous solve across resolutions (1D reference setup)."""

import argparse
from pathlib import Path

from wavehum.energy import conservation_report
from wavehum.pipelines import build_setup, initial_data
from wavehum.scenario import load_scenario
from wavehum.wave_solver import solve_homogeneous

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(SCENARIOS / "reference_1d.yaml"))
    ap.add_argument("--resolutions", type=int, nargs="+", default=[100, 200, 400, 800])
    ap.add_argument("--T", type=float, default=4.0)
    ap.add_argument("--cfl", type=float, default=0.5)
    args = ap.parse_args()

    scenario = load_scenario(args.config)
    print(f"{'resolution':>10} {'steps':>7} {'drift':>12} {'compatible':>12}")
    for r in args.resolutions:
        s = build_setup(scenario, resolution=r, T=args.T)
        traj = solve_homogeneous(s.ops, *initial_data(s), args.T, s.ops.stable_dt(args.cfl))
        drift = conservation_report(traj)[0]
        compat = conservation_report(traj, compatible=True)[0]
        print(f"{r:>10} {len(traj.times) - 1:>7} {drift:>12.3e} {compat:>12.3e}")


if __name__ == "__main__":
    main()
