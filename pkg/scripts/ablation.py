"""Drop the interface control region and compare the HUM outcome with the full control."""

import argparse
from pathlib import Path

from wavehum.hum import solve_hum, verify_null
from wavehum.pipelines import build_setup, initial_data
from wavehum.scenario import load_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(SCENARIOS / "reference_1d.yaml"))
    ap.add_argument("--max-iter", type=int, default=200)
    args = ap.parse_args()

    s = build_setup(load_scenario(args.config))
    U0, U1 = initial_data(s)
    for label, regions in (("full", s.regions), ("no interface region", s.regions.without_omega2())):
        res = solve_hum(s.ops, regions, U0, U1, s.T, s.dt, tol=1e-8, max_iter=args.max_iter)
        e_ratio = verify_null(res, s.ops)[0]
        print(f"{label:<20} converged={res.converged!s:<5} iterations={res.iterations:>4} e_ratio={e_ratio:.3e}")


if __name__ == "__main__":
    main()
