"""Scenario -> numerical setup -> pipeline results and artifacts."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import energy as en
from . import hum as hm
from . import multiplier as mp
from . import observability as ob
from .discretization import assemble, eigenmodes
from .errors import InfeasibleGeometry
from .geometry import build_control_regions, build_domain, check_star_shaped, partition_boundary, radii
from .material import affine, checkerboard, identity_scaled, validate_material
from .oracle import standing_wave_profile
from .wave_solver import solve_homogeneous, write_trajectory_binary


@dataclass
class Setup:
    scenario: object
    domain: object
    material: object
    ops: object
    x0: np.ndarray
    partition: object
    regions: object
    radii: tuple
    n: int
    budget: object
    star_shaped: bool
    T: float
    dt: float
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def R(self):
        return self.radii[2]

    def modes(self, k):
        if self.cache.get("modes_k", 0) < k:
            self.cache["modes"] = eigenmodes(self.ops, k)
            self.cache["modes_k"] = k
        lam, phi = self.cache["modes"]
        return lam[:k], phi[:k]


def coefficient_field(spec, dim):
    p = spec.params
    if spec.family == "identity-scaled":
        return identity_scaled(p.get("c", 1.0))
    if spec.family == "checkerboard":
        return checkerboard(p["c1"], p["c2"])
    c0 = np.asarray(p["c0"], float).reshape(dim, dim)
    return affine(c0, np.asarray(p["grad"], float).reshape(dim, dim, dim))


def build_setup(scenario, resolution=None, T=None):
    s = scenario if resolution is None else scenario.with_resolution(resolution)
    d = s.domain
    domain = build_domain(d.dim, d.outer, d.inner, d.resolution)
    material = validate_material(domain, coefficient_field(s.material, d.dim), s.material.h)
    ops = assemble(domain, material)
    x0 = np.asarray(s.observer, float)
    star = check_star_shaped(domain, x0)
    part = partition_boundary(domain, x0)
    rad = radii(domain, x0)
    n = d.dim
    budget = ob.time_budget(material, rad[2], n)
    regions = build_control_regions(domain, part, s.regions.thickness1, s.regions.thickness2)
    if T is None:
        if s.time.T == "auto":
            if not budget.feasible:
                raise InfeasibleGeometry(
                    f"R={rad[2]:.6g} violates R < alpha/(n M) = {material.alpha / (n * material.M):.6g}"
                )
            T = s.time.factor * budget.T_min
        else:
            T = float(s.time.T)
    cfl = s.time.cfl()
    dt = ops.stable_dt(cfl) if cfl is not None else float(s.time.dt)
    return Setup(s, domain, material, ops, x0, part, regions, rad, n, budget, star, float(T), dt)


def initial_data(setup, seed=None):
    spec = setup.scenario.initial_data
    ops = setup.ops
    if spec.family == "zero":
        return np.zeros(ops.ndof), np.zeros(ops.ndof)
    if spec.family == "standing-wave":
        box = setup.domain.outer_box

        def f(p):
            return spec.amplitude * standing_wave_profile(p, spec.mode, box.lo, box.hi)

        return ops.sample(f), np.zeros(ops.ndof)
    modes = setup.modes(spec.modes)
    z0, z1 = ob.low_mode_data(ops, 1, spec.modes, spec.seed if seed is None else seed, modes=modes)[0]
    return spec.amplitude * z0, spec.amplitude * z1


# --- writers ----------------------------------------------------------------------


def _json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _setup_summary(setup):
    return {
        "T": setup.T,
        "dt": setup.dt,
        "T0": setup.budget.T0,
        "T_min": setup.budget.T_min,
        "condition_ratio": setup.budget.condition_ratio,
        "feasible": setup.budget.feasible,
        "R": setup.R,
        "R1": setup.radii[0],
        "R2": setup.radii[1],
        "alpha": setup.material.alpha,
        "beta": setup.material.beta,
        "M": setup.material.M,
        "h0": setup.material.h0,
        "star_shaped": setup.star_shaped,
        "ndof": setup.ops.ndof,
    }


# --- pipelines --------------------------------------------------------------------


def run_simulate(setup, out, seed=None):
    z0, z1 = initial_data(setup, seed)
    traj = solve_homogeneous(setup.ops, z0, z1, setup.T, setup.dt)
    drift, series = en.conservation_report(traj)
    cdrift, cseries = en.conservation_report(traj, compatible=True)
    files = {
        "energy.csv": lambda p: en.write_energy_csv(series, p),
        "energy_compatible.csv": lambda p: en.write_energy_csv(cseries, p),
        "trajectory.bin": lambda p: write_trajectory_binary(traj, p),
        "domain_summary.txt": lambda p: _text(p, setup.domain.summary(setup.partition)),
    }
    summary = dict(_setup_summary(setup), energy_drift=drift, compatible_drift=cdrift, E0=float(series.total[0]))
    return summary, files


def run_multiplier(setup, out, seed=None):
    z0, z1 = initial_data(setup, seed)
    traj = solve_homogeneous(setup.ops, z0, z1, setup.T, setup.dt)
    kind = setup.scenario.run.field
    q = mp.build_field(
        kind, setup.domain, setup.regions, setup.x0, {"T": setup.T, "dt": traj.dt}, partition=setup.partition
    )
    res = mp.multiplier_identity(traj, q, setup.ops)
    S, S_gamma = mp.compute_S(traj, setup.x0, setup.ops)
    E0 = en.energy_at(setup.ops, traj.states[0], traj.velocities[0]).total
    bound = mp.star_shaped_lower_bound(setup.material, setup.R, setup.n, setup.T, E0)
    summary = dict(
        _setup_summary(setup),
        field=kind,
        lhs=res.lhs,
        rhs=res.rhs,
        residual=res.residual,
        S=S,
        S_gamma=S_gamma,
        E0=E0,
        lower_bound=bound,
    )
    return summary, {"multiplier_breakdown.csv": lambda p: mp.write_breakdown_csv(res, p)}


def run_observability(setup, out, seed=None):
    spec = setup.scenario
    s = spec.initial_data.seed if seed is None else seed
    modes = setup.modes(spec.run.ensemble_modes)
    data = ob.low_mode_data(setup.ops, spec.run.ensemble_size, spec.run.ensemble_modes, s, modes=modes)
    rep = ob.run_ensemble(setup.ops, setup.regions, setup.T, setup.dt, data=data, T_min=setup.budget.T_min)
    inv = [r.omega_norm / r.E0 for r in rep.records if r.E0 > 0]
    summary = dict(
        _setup_summary(setup),
        max_ratio=rep.max_ratio,
        median_ratio=rep.median_ratio,
        spread=rep.spread,
        all_finite=rep.all_finite,
        short_time=rep.short_time,
        c_low=min(inv),
        c_high=max(inv),
    )
    return summary, {"observability.csv": lambda p: ob.write_ensemble_csv(rep, p)}


def run_time_budget(setup, out, seed=None):
    return _setup_summary(setup), {}


def run_hum(setup, out, seed=None):
    spec = setup.scenario.run
    U0, U1 = initial_data(setup, seed)
    K = spec.filter_modes
    res = hm.solve_hum(
        setup.ops,
        setup.regions,
        U0,
        U1,
        setup.T,
        setup.dt,
        tol=spec.tol,
        max_iter=spec.max_iter,
        T_min=setup.budget.T_min,
        filter_modes=K,
        modes=setup.modes(K) if K else None,
    )
    e_ratio, uT, vT = hm.verify_null(res, setup.ops)
    summary = dict(_setup_summary(setup), **res.summary(), u_T_norm=uT, v_T_norm=vT)
    summary["e_ratio"] = e_ratio
    files = {
        "control.csv": lambda p: hm.write_control_csv(res, setup.ops, p),
        "cg_history.csv": lambda p: hm.write_cg_history_csv(res, p),
    }
    return summary, files, res


def run_oracle(scenario, out):
    from .oracle import refine_study, write_oracle_csv

    spec = scenario.run
    rep = refine_study(scenario, spec.quantity, spec.levels, budget_seconds=spec.budget_seconds)
    summary = {
        "quantity": rep.quantity,
        "resolutions": rep.resolutions,
        "values": rep.values,
        "observed_order": rep.observed_order,
        "extrapolated": rep.extrapolated,
        "applicable": rep.applicable,
        "monotone": rep.monotone,
    }
    return summary, {"oracle.csv": lambda p: write_oracle_csv(rep, p)}


# --- scalar extractors for refinement studies ------------------------------------


def quantity_energy_drift(setup):
    z0, z1 = initial_data(setup)
    return en.conservation_report(solve_homogeneous(setup.ops, z0, z1, setup.T, setup.dt))[0]


def quantity_compatible_drift(setup):
    z0, z1 = initial_data(setup)
    return en.conservation_report(solve_homogeneous(setup.ops, z0, z1, setup.T, setup.dt), compatible=True)[0]


def quantity_multiplier_residual(setup):
    z0, z1 = initial_data(setup)
    traj = solve_homogeneous(setup.ops, z0, z1, setup.T, setup.dt)
    q = mp.build_field(setup.scenario.run.field, setup.domain, setup.regions, setup.x0, {"T": setup.T, "dt": traj.dt}, partition=setup.partition)
    return mp.multiplier_identity(traj, q, setup.ops).residual


def quantity_e_ratio(setup):
    spec = setup.scenario.run
    U0, U1 = initial_data(setup)
    K = spec.filter_modes
    res = hm.solve_hum(
        setup.ops, setup.regions, U0, U1, setup.T, setup.dt, spec.tol, spec.max_iter,
        filter_modes=K, modes=setup.modes(K) if K else None,
    )
    return res.e_ratio


def quantity_standing_wave_error(setup):
    """Max nodal error against the glued standing wave at final time (standing-wave data only)."""
    from .oracle import standing_wave_field

    z0, z1 = initial_data(setup)
    traj = solve_homogeneous(setup.ops, z0, z1, setup.T, setup.dt)
    box = setup.domain.outer_box
    spec = setup.scenario.initial_data
    c = math.sqrt(setup.scenario.material.params.get("c", 1.0))
    pts = setup.domain.points
    exact = spec.amplitude * standing_wave_field(pts, setup.T, spec.mode, c=c, lo=box.lo, hi=box.hi)
    grid = exact.reshape(setup.domain.shape)
    ref = setup.ops.join(grid, grid)
    return float(np.max(np.abs(traj.states[-1] - ref)))


QUANTITIES = {
    "energy_drift": quantity_energy_drift,
    "compatible_drift": quantity_compatible_drift,
    "multiplier_residual": quantity_multiplier_residual,
    "e_ratio": quantity_e_ratio,
    "standing_wave_error": quantity_standing_wave_error,
}


def write_artifacts(out, summary, files, summary_name="summary.json"):
    os.makedirs(out, exist_ok=True)
    written = []
    for name, writer in files.items():
        writer(os.path.join(out, name))
        written.append(name)
    _json(os.path.join(out, summary_name), summary)
    written.append(summary_name)
    return written
