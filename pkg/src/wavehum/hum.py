"""Hilbert Uniqueness Method: the Lambda operator, its CG solve, and null-control checks.

Given initial data a = (z0, z1) of the homogeneous problem, z is its forward
trajectory and theta solves the backward problem with the duality source
G(z) = (-z'' + z) chi_omega, whose weak action on a test sequence v is the
discrete form

    B(z, v) = sum_{k<N} dt (dz_{k+1/2})^T M_w dv_{k+1/2} + sum_k w_k z_k^T M_w v_k,

dz_{k+1/2} = (z_{k+1} - z_k)/dt, trapezoid weights w_k, and M_w the lumped
mass restricted to omega1 and omega2. The corresponding loads are
G_k = -M_w (z_{k+1} - 2 z_k + z_{k-1})/dt^2 + M_w z_k inside, with one-sided
closures -(2/dt) M_w dz_{1/2} and +(2/dt) M_w dz_{N-1/2} added at k = 0 and N.

Lambda a = (theta'(0), -theta(0)). Because the backward solve is the exact
transpose of the forward solve,

    -(Lambda_1 a, b0)_M - (Lambda_2 a, b1)_M = B(z_a, z_b),

so the map a -> (-M theta'(0), M theta(0)) is symmetric positive
semi-definite in the Euclidean dot product, and the null-control condition
Lambda a = (U1, -U0) becomes the SPD system L a = (-M U1, M U0), solved by
preconditioned conjugate residuals (or CG) with the energy Riesz map
diag(K^{-1}, M^{-1}).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as sla

from .discretization import eigenmodes
from .energy import energy_at
from .errors import NotConverged
from .wave_solver import (
    ControlVector,
    solve_backward,
    solve_controlled,
    solve_homogeneous,
    time_grid,
    time_weights,
)


class InfeasibleTimeWarning(UserWarning):
    pass


def omega_mass(ops, regions):
    return ops.mass_of_mask(regions.omega1, regions.omega2)


def duality_load(ops, mw, Z, dt):
    """Loads G_k realising B(z, .) as sum_k w_k G_k . v_k."""
    n = len(Z) - 1
    G = Z * mw
    D = np.diff(Z, axis=0) / dt  # dz_{k+1/2}
    G[0] -= (2.0 / dt) * mw * D[0]
    G[n] += (2.0 / dt) * mw * D[n - 1]
    if n >= 2:
        G[1:n] -= mw * (D[1:] - D[:-1]) / dt
    return G


def observation_form(ops, mw, Za, Zb, dt):
    """B(z_a, z_b) computed directly from the two trajectories."""
    Da = np.diff(Za, axis=0) / dt
    Db = np.diff(Zb, axis=0) / dt
    w = time_weights(len(Za) - 1, dt)
    return float(dt * np.einsum("ki,i,ki->", Da, mw, Db) + np.einsum("k,ki,i,ki->", w, Za, mw, Zb))


def observation_norm(ops, regions, traj):
    """Discrete int int_omega (|z'|^2 + |z|^2) of a homogeneous trajectory."""
    return observation_form(ops, omega_mass(ops, regions), traj.states, traj.states, traj.dt)


@dataclass
class LambdaOperator:
    """a = (z0, z1) -> Lambda a, with the intermediate solves kept on request."""

    ops: object
    regions: object
    T: float
    dt: float
    mw: np.ndarray = field(init=False, repr=False)
    applications: int = field(default=0, init=False)

    def __post_init__(self):
        self.mw = omega_mass(self.ops, self.regions)
        _, self.dt = time_grid(self.T, self.dt)

    def trajectories(self, z0, z1):
        z = solve_homogeneous(self.ops, z0, z1, self.T, self.dt)
        G = duality_load(self.ops, self.mw, z.states, z.dt)
        theta = solve_backward(self.ops, G, self.T, self.dt, as_load=True)
        self.applications += 1
        return z, G, theta

    def __call__(self, z0, z1):
        _, _, theta = self.trajectories(z0, z1)
        return theta.velocities[0].copy(), -theta.states[0]

    def spd(self, x):
        """Symmetric form on the stacked vector x = [z0, z1]."""
        n = self.ops.ndof
        l1, l2 = self(x[:n], x[n:])
        m = self.ops.mass
        return np.concatenate([-m * l1, -m * l2])


def apply_lambda(ops, regions, z_init, T, dt):
    return LambdaOperator(ops, regions, T, dt)(*z_init)


def lambda_pairing(ops, lam, b):
    """-(Lambda_1, b0)_M - (Lambda_2, b1)_M; equals B(z_a, z_b) for lam = Lambda a."""
    m = ops.mass
    return -float(lam[0] @ (m * b[0])) - float(lam[1] @ (m * b[1]))


@dataclass
class HumResult:
    z_init: tuple
    control: ControlVector | None
    cg_history: list
    final_state_energy: float
    initial_energy: float
    converged: bool
    iterations: int
    T: float
    dt: float
    T_min: float | None = None
    trajectory: object = field(default=None, repr=False)
    filtered_modes: int | None = None

    @property
    def e_ratio(self):
        if self.initial_energy == 0.0:
            return 0.0
        return self.final_state_energy / self.initial_energy

    def summary(self):
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "e_ratio": float(self.e_ratio),
            "T": float(self.T),
            "T_min": None if self.T_min is None else float(self.T_min),
            "dt": float(self.dt),
            "final_state_energy": float(self.final_state_energy),
            "initial_energy": float(self.initial_energy),
            "filtered_modes": self.filtered_modes,
        }


def _pcg(apply_A, b, apply_P, tol, max_iter, quad=True):
    """Preconditioned CG; history rows (P-norm residual / P-norm rhs, x.Ax)."""
    x = np.zeros_like(b)
    Ax = np.zeros_like(b)
    r = b.copy()
    z = apply_P(r)
    rz = float(r @ z)
    bnorm = math.sqrt(rz)
    history = [(1.0 if bnorm > 0 else 0.0, 0.0)]
    if bnorm == 0.0:
        return x, history, True, 0
    p = z.copy()
    for it in range(1, max_iter + 1):
        Ap = apply_A(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            return x, history, False, it - 1
        alpha = rz / pAp
        x += alpha * p
        Ax += alpha * Ap
        r -= alpha * Ap
        z = apply_P(r)
        rz_new = float(r @ z)
        rel = math.sqrt(max(rz_new, 0.0)) / bnorm
        history.append((rel, float(x @ Ax) if quad else math.nan))
        if rel <= tol:
            return x, history, True, it
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, history, False, max_iter


def _pcr(apply_A, b, apply_P, tol, max_iter, quad=True):
    """Preconditioned conjugate residual: same Krylov spaces as PCG, but each
    iterate minimises the reported residual sqrt(r^T P r), so the history is
    nonincreasing (in exact arithmetic)."""
    x = np.zeros_like(b)
    Ax = np.zeros_like(b)
    r = b.copy()
    z = apply_P(r)
    bnorm = math.sqrt(float(r @ z))
    history = [(1.0 if bnorm > 0 else 0.0, 0.0)]
    if bnorm == 0.0:
        return x, history, True, 0
    Az = apply_A(z)
    zAz = float(z @ Az)
    p = z.copy()
    Ap = Az.copy()
    for it in range(1, max_iter + 1):
        PAp = apply_P(Ap)
        denom = float(Ap @ PAp)
        if denom <= 0.0 or zAz <= 0.0:
            return x, history, False, it - 1
        alpha = zAz / denom
        x += alpha * p
        Ax += alpha * Ap
        r -= alpha * Ap
        z -= alpha * PAp
        rel = math.sqrt(max(float(r @ z), 0.0)) / bnorm
        history.append((rel, float(x @ Ax) if quad else math.nan))
        if rel <= tol:
            return x, history, True, it
        Az = apply_A(z)
        zAz_new = float(z @ Az)
        beta = zAz_new / zAz
        zAz = zAz_new
        p = z + beta * p
        Ap = Az + beta * Ap
    return x, history, False, max_iter


_KRYLOV = {"cr": _pcr, "cg": _pcg}


def solve_hum(
    ops,
    regions,
    U0,
    U1,
    T,
    dt,
    tol=1e-8,
    max_iter=200,
    T_min=None,
    filter_modes=None,
    modes=None,
    raise_on_failure=False,
    method="cr",
):
    """Null control for data (U0, U1) from a Krylov solve of Lambda a = (U1, -U0).

    ``filter_modes=K`` restricts the unknowns to the span of the lowest K
    eigenmodes (per block) and solves the Galerkin-projected system there.
    ``method`` selects the Krylov recurrence: "cr" (conjugate residual, default;
    monotone residual history) or "cg".
    """
    krylov = _KRYLOV[method]
    U0 = np.asarray(U0, float)
    U1 = np.asarray(U1, float)
    n = ops.ndof
    if T_min is not None and T < T_min:
        warnings.warn(f"T={T:.6g} is below the admissible time {T_min:.6g}", InfeasibleTimeWarning, stacklevel=2)
    lam_op = LambdaOperator(ops, regions, T, dt)
    e0 = energy_at(ops, U0, U1).total
    m = ops.mass
    b = np.concatenate([-m * U1, m * U0])

    if filter_modes:
        lam, phi = modes if modes is not None else eigenmodes(ops, filter_modes)
        lam, phi = lam[:filter_modes], phi[:filter_modes]
        kk = len(lam)

        def lift(c):
            return np.concatenate([c[:kk] @ phi, c[kk:] @ phi])

        def restrict(x):
            return np.concatenate([phi @ x[:n], phi @ x[n:]])

        pdiag = np.concatenate([1.0 / lam, np.ones(kk)])
        c, history, converged, iters = krylov(
            lambda c: restrict(lam_op.spd(lift(c))), restrict(b), lambda r: pdiag * r, tol, max_iter
        )
        x = lift(c)
    else:
        lu = sla.splu(ops.stiffness.tocsc())

        def precond(r):
            return np.concatenate([lu.solve(r[:n]), r[n:] / m])

        x, history, converged, iters = krylov(lam_op.spd, b, precond, tol, max_iter)

    z0, z1 = x[:n], x[n:]
    if not np.any(x) and e0 == 0.0:
        times, dte = time_grid(T, dt)
        ctrl = ControlVector.zero(ops, times, omega_mass(ops, regions) > 0)
        result = HumResult((z0, z1), ctrl, history, 0.0, 0.0, True, 0, T, dte, T_min, None, filter_modes)
        return result
    z, G, _ = lam_op.trajectories(z0, z1)
    support = lam_op.mw > 0
    control = ControlVector(z.times, G / m, support)
    u = solve_controlled(ops, U0, U1, control, T, z.dt)
    eT = energy_at(ops, u.states[-1], u.velocities[-1]).total
    result = HumResult((z0, z1), control, history, eT, e0, converged, iters, T, z.dt, T_min, u, filter_modes)
    if not converged and raise_on_failure:
        raise NotConverged(f"CG did not reach tol={tol:g} in {max_iter} iterations", result)
    return result


def verify_null(result, ops):
    """(E_u(T)/E_u(0), |u(T)|_M, |u'(T)|_M), recomputing the controlled run if needed."""
    if result.initial_energy == 0.0 and result.final_state_energy == 0.0:
        return 0.0, 0.0, 0.0
    u = result.trajectory
    if u is None:
        raise ValueError("result carries no controlled trajectory")
    m = ops.mass
    uT = u.states[-1]
    vT = u.velocities[-1]
    e = energy_at(ops, uT, vT).total
    e0 = energy_at(ops, u.states[0], u.velocities[0]).total
    return e / e0, math.sqrt(float(uT @ (m * uT))), math.sqrt(float(vT @ (m * vT)))


def write_control_csv(result, ops, path):
    """Rows ``t,node,comp,value`` over the control support."""
    c1, c2 = result.control.components(ops)
    supp1, supp2 = ops.split(result.control.mask.astype(float))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,node,comp,value\n")
        for k, t in enumerate(result.control.times):
            for comp, (grid, supp) in enumerate(((c1, supp1), (c2, supp2)), start=1):
                flat = grid[k].ravel()
                for node in np.flatnonzero(supp.ravel() > 0):
                    fh.write(f"{t:.17g},{node},{comp},{flat[node]:.17g}\n")


def write_cg_history_csv(result, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,residual,quadratic_form\n")
        for i, (r, q) in enumerate(result.cg_history):
            fh.write(f"{i},{r:.17g},{q:.17g}\n")
