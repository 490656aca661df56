"""Admissible control time and empirical observability constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import eigenmodes
from .energy import energy_at
from .errors import EmptyEnsemble
from .wave_solver import corrected_velocities, solve_homogeneous, time_weights


@dataclass(frozen=True)
class TimeBudget:
    T0: float
    condition_ratio: float
    T_min: float
    feasible: bool


def time_budget_values(alpha, M, R, n, h0):
    """T0 = 2 max(R/sqrt(a), (n-1) sqrt(a)/(2 h0)) + 2 max(1, R, R/a, R^2/a)."""
    if R <= 0 or alpha <= 0 or h0 <= 0:
        raise ValueError("R, alpha and h0 must be positive")
    sa = math.sqrt(alpha)
    T0 = 2.0 * max(R / sa, (n - 1) * sa / (2.0 * h0)) + 2.0 * max(1.0, R, R / alpha, R * R / alpha)
    ratio = n * R * M / alpha
    feasible = M == 0.0 or R < alpha / (n * M)
    if M == 0.0:
        T_min = T0
    elif feasible:
        T_min = T0 / (1.0 - ratio)
    else:
        T_min = math.inf
    return TimeBudget(T0=T0, condition_ratio=ratio, T_min=T_min, feasible=feasible)


def time_budget(material, R, n, h0=None):
    return time_budget_values(material.alpha, material.M, R, n, material.h0 if h0 is None else h0)


@dataclass(frozen=True)
class ObservabilityReport:
    E0: float
    omega_norm: float
    ratio: float
    short_time: bool = False
    ensemble: tuple = field(default=(), repr=False)


def omega_density(ops, regions, traj):
    """Per-step sum over omega nodes of lumped (|z'|^2 + |z|^2)."""
    m1 = ops.mass_of_mask(regions.omega1, np.zeros_like(regions.omega2))
    m2 = ops.mass_of_mask(np.zeros_like(regions.omega1), regions.omega2)
    mw = m1 + m2
    Z = traj.states
    V = corrected_velocities(traj)
    return np.einsum("ki,i,ki->k", V, mw, V) + np.einsum("ki,i,ki->k", Z, mw, Z)


def observability_ratio(traj, regions, ops=None, T_min=None):
    ops = traj.ops if ops is None else ops
    E0 = energy_at(ops, traj.states[0], traj.velocities[0]).total
    dens = omega_density(ops, regions, traj)
    omega_norm = float(time_weights(len(dens) - 1, traj.dt) @ dens)
    ratio = E0 / omega_norm if omega_norm > 0.0 else (0.0 if E0 == 0.0 else math.inf)
    short = T_min is not None and traj.T < T_min
    return ObservabilityReport(E0=E0, omega_norm=omega_norm, ratio=ratio, short_time=short)


@dataclass(frozen=True)
class EnsembleRecord:
    sample_id: int
    E0: float
    omega_norm: float
    ratio: float


@dataclass(frozen=True)
class EnsembleReport:
    T: float
    records: list
    max_ratio: float
    median_ratio: float
    spread: float
    all_finite: bool
    short_time: bool

    def ratios(self):
        return np.array([r.ratio for r in self.records])


def low_mode_data(ops, n_samples, n_modes=8, seed=0, modes=None):
    """Random initial pairs: z0 = sum a_k phi_k / sqrt(lam_k), z1 = sum b_k phi_k, a, b ~ N(0, 1)."""
    lam, phi = modes if modes is not None else eigenmodes(ops, n_modes)
    lam, phi = lam[:n_modes], phi[:n_modes]
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_samples):
        a = rng.standard_normal(len(lam))
        b = rng.standard_normal(len(lam))
        out.append(((a / np.sqrt(lam)) @ phi, b @ phi))
    return out


def run_ensemble(ops, regions, T, dt, n_samples=32, n_modes=8, seed=0, T_min=None, data=None):
    """Observability ratios for a seeded low-mode ensemble."""
    data = low_mode_data(ops, n_samples, n_modes, seed) if data is None else data
    if not data:
        raise EmptyEnsemble("ensemble has no samples")
    records = []
    for i, (z0, z1) in enumerate(data):
        traj = solve_homogeneous(ops, z0, z1, T, dt)
        rep = observability_ratio(traj, regions, ops, T_min)
        records.append(EnsembleRecord(i, rep.E0, rep.omega_norm, rep.ratio))
    r = np.array([rec.ratio for rec in records])
    finite = bool(np.all(np.isfinite(r)))
    med = float(np.median(r))
    mx = float(np.max(r))
    return EnsembleReport(
        T=float(T),
        records=records,
        max_ratio=mx,
        median_ratio=med,
        spread=mx / med if med > 0 else math.inf,
        all_finite=finite,
        short_time=T_min is not None and T < T_min,
    )


def norm_equivalence(trajectories, regions, ops=None):
    """(min, max) of omega_norm / E0 over the ensemble."""
    vals = []
    for traj in trajectories:
        rep = observability_ratio(traj, regions, ops)
        if rep.E0 > 0.0:
            vals.append(rep.omega_norm / rep.E0)
    if not vals:
        raise EmptyEnsemble("no trajectory with nonzero initial energy")
    return float(min(vals)), float(max(vals))


def write_ensemble_csv(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sample_id,E0,omega_norm,ratio\n")
        for r in report.records:
            fh.write(f"{r.sample_id},{r.E0:.17g},{r.omega_norm:.17g},{r.ratio:.17g}\n")
        fh.write(
            f"# T={report.T:.17g} max_ratio={report.max_ratio:.17g} median_ratio={report.median_ratio:.17g} "
            f"spread={report.spread:.17g} all_finite={report.all_finite} short_time={report.short_time}\n"
        )
