"""Command-line front end.

    wavehum <simulate|multiplier-check|observability|time-budget|hum|oracle>
            --config scenario.yaml [--out DIR] [--seed N] [--threads N] [--quiet]

Exit status: 0 ok, 2 configuration error, 3 infeasible geometry,
4 HUM not converged, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys

from . import __version__
from .errors import (
    BudgetExceeded,
    CflViolation,
    ConfigError,
    InfeasibleGeometry,
    NonFiniteState,
    NotConverged,
    WaveHumError,
)
from .scenario import PIPELINES, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_CONVERGED = 4
EXIT_NUMERICAL = 5


def git_blob_sha1(data: bytes) -> str:
    """Same digest as ``git hash-object`` for the given bytes."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _parser():
    p = argparse.ArgumentParser(prog="wavehum", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=PIPELINES)
    p.add_argument("--config", required=True, help="scenario YAML file")
    p.add_argument("--out", help="output directory (default: run.output from the config)")
    p.add_argument("--seed", type=int, help="overrides initial_data.seed")
    p.add_argument("--threads", type=int, help="overrides run.threads")
    p.add_argument("--quiet", action="store_true", help="suppress the summary printout")
    return p


def _say(quiet, *args):
    if not quiet:
        print(*args)


def _write_manifest(out, args, config_bytes, scenario, seed, outputs, status):
    entries = []
    for name in outputs:
        with open(os.path.join(out, name), "rb") as fh:
            entries.append({"file": name, "sha1": git_blob_sha1(fh.read())})
    manifest = {
        "command": args.command,
        "config": os.path.abspath(args.config),
        "config_sha1": git_blob_sha1(config_bytes),
        "scenario": scenario.name,
        "schema_version": scenario.schema_version,
        "seed": seed,
        "threads": scenario.run.threads,
        "version": __version__,
        "exit_status": status,
        "outputs": entries,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _print_summary(quiet, summary, keys):
    for k in keys:
        if k in summary:
            _say(quiet, f"{k}: {summary[k]}")


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        with open(args.config, "rb") as fh:
            config_bytes = fh.read()
        scenario = load_scenario(args.config)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None:
        scenario.run.threads = args.threads
    seed = scenario.initial_data.seed if args.seed is None else args.seed
    scenario.initial_data.seed = seed
    out = args.out or scenario.run.output
    os.makedirs(out, exist_ok=True)

    from . import pipelines as pl

    status = EXIT_OK
    try:
        if args.command == "oracle":
            summary, files = pl.run_oracle(scenario, out)
            keys = ("quantity", "resolutions", "values", "observed_order", "extrapolated")
        else:
            setup = pl.build_setup(scenario)
            if args.command == "simulate":
                summary, files = pl.run_simulate(setup, out)
                keys = ("T", "energy_drift", "compatible_drift")
            elif args.command == "multiplier-check":
                summary, files = pl.run_multiplier(setup, out)
                keys = ("field", "lhs", "rhs", "residual", "S", "lower_bound")
            elif args.command == "observability":
                summary, files = pl.run_observability(setup, out)
                keys = ("T", "T_min", "max_ratio", "median_ratio", "spread", "c_low", "c_high")
            elif args.command == "time-budget":
                summary, files = pl.run_time_budget(setup, out)
                keys = ("T0", "condition_ratio", "T_min", "feasible", "R")
            else:
                summary, files, res = pl.run_hum(setup, out)
                keys = ("converged", "iterations", "e_ratio", "T", "T_min")
                if not res.converged:
                    status = EXIT_NOT_CONVERGED
        name = "hum_summary.json" if args.command == "hum" else "summary.json"
        written = pl.write_artifacts(out, summary, files, name)
        _print_summary(args.quiet, summary, keys)
    except InfeasibleGeometry as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (CflViolation, NonFiniteState, BudgetExceeded) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except WaveHumError as exc:
        # geometry and material errors come from the scenario contents
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write_manifest(out, args, config_bytes, scenario, seed, written, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
