"""Multiplier-identity residual under grid refinement for each vector field kind."""

import argparse
from pathlib import Path

from wavehum.multiplier import build_field, compute_S, multiplier_identity
from wavehum.oracle import three_grid_order
from wavehum.pipelines import build_setup, initial_data
from wavehum.scenario import load_scenario
from wavehum.wave_solver import solve_homogeneous

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
KINDS = ("RadialM", "BoundaryTau", "InterfaceMW", "CutoffP")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(SCENARIOS / "reference_1d.yaml"))
    ap.add_argument("--resolutions", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--fields", nargs="+", default=list(KINDS), choices=KINDS)
    args = ap.parse_args()

    scenario = load_scenario(args.config)
    T = None
    rows = {k: [] for k in args.fields}
    for r in args.resolutions:
        s = build_setup(scenario, resolution=r, T=T)
        T = s.T
        traj = solve_homogeneous(s.ops, *initial_data(s), s.T, s.dt)
        for kind in args.fields:
            q = build_field(kind, s.domain, s.regions, s.x0, {"T": s.T, "dt": traj.dt}, partition=s.partition)
            rows[kind].append(multiplier_identity(traj, q, s.ops).residual)
        S, S_gamma = compute_S(traj, s.x0, s.ops)
        print(f"resolution {r}: S={S:.6g} S_gamma={S_gamma:.3e}")
    print(f"{'field':<14}" + "".join(f"{r:>12}" for r in args.resolutions) + f"{'order':>8}")
    for kind, vals in rows.items():
        order = three_grid_order(*vals[-3:])[0] if len(vals) >= 3 else float("nan")
        print(f"{kind:<14}" + "".join(f"{v:>12.3e}" for v in vals) + f"{order:>8.2f}")


if __name__ == "__main__":
    main()
