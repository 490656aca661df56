"""Leapfrog integration of M z'' + K z = F for the two-component problem.

States are dof vectors (see :mod:`wavehum.discretization`); a trajectory is an
(N+1, ndof) array on the uniform time grid t_k = k dt.

Velocities
----------
Interior samples are centred differences (z[k+1] - z[k-1]) / (2 dt). The
endpoints use the Taylor closures of the scheme itself::

    v[0] = (z[1] - z[0]) / dt + dt/2 M^{-1} (K z[0] - F[0])
    v[N] = (z[N] - z[N-1]) / dt + dt/2 M^{-1} (F[N] - K z[N])

These invert the start-up step exactly, so load impulses at t = 0 and t = T
stay visible in the end velocities. They also make the time-reflected backward
solve the exact transpose of the forward solve under trapezoid time weights.

For a leapfrog mode with eigenvalue lam, every one of these samples carries
the amplitude factor sqrt(1 - lam dt^2 / 4) relative to the true velocity,
because the discrete frequency differs from sqrt(lam). :func:`corrected_velocities`
removes that factor to O(lam^2 dt^4) using the scheme's own operator
(v + dt^2/8 M^{-1}(K v - F')). Energy, multiplier and observability
diagnostics use the corrected samples.

Binary dump layout (little endian)
----------------------------------
``b"HUMW"``, u32 version (=1), u32 dim, dim x u32 grid shape, u32 n_times,
then f64 times[n_times], then four f64 blocks of shape (n_times, *grid):
state comp1, state comp2, velocity comp1, velocity comp2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CflViolation, NonFiniteState, ShapeMismatch

MAX_CFL = 0.9
_MAGIC = b"HUMW"
_VERSION = 1


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    velocities: np.ndarray = field(repr=False)
    loads: np.ndarray | None = field(repr=False)
    ops: object = field(repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def dt(self):
        return self.meta["dt"]

    @property
    def T(self):
        return self.meta["T"]

    @property
    def nsteps(self):
        return len(self.times) - 1

    def pair(self, k):
        """(state, velocity) at step k as PairFields."""
        return self.ops.split(self.states[k]), self.ops.split(self.velocities[k])

    def split_states(self):
        return self.ops.split(self.states)

    def split_velocities(self):
        return self.ops.split(self.velocities)


@dataclass(frozen=True)
class ControlVector:
    """Nodal control values zeta^k (dof layout), zero outside ``mask``."""

    times: np.ndarray
    zeta: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        if np.any(self.zeta[:, ~self.mask] != 0.0):
            raise ValueError("control has values outside its support mask")

    def components(self, ops):
        """(zeta1, zeta2) as time-indexed grid arrays."""
        return ops.split(self.zeta)

    @classmethod
    def zero(cls, ops, times, mask=None):
        mask = np.zeros(ops.ndof, bool) if mask is None else mask
        return cls(np.asarray(times), np.zeros((len(times), ops.ndof)), mask)


def time_grid(T, dt):
    """Uniform grid reaching T exactly; dt is reduced (never increased) to fit."""
    if T <= 0 or dt <= 0:
        raise ValueError(f"T and dt must be positive (T={T}, dt={dt})")
    n = int(np.ceil(T / dt - 1e-9))
    n = max(n, 1)
    return np.linspace(0.0, T, n + 1), T / n


def cfl_number(ops, dt):
    """dt relative to the leapfrog limit 2/sqrt(rho(M^{-1}K)); stable below 1."""
    return dt * np.sqrt(ops.spectral_radius_bound()) / 2.0


def _check_cfl(ops, dt):
    c = cfl_number(ops, dt)
    if c > MAX_CFL * (1 + 1e-12):
        raise CflViolation(f"time step {dt:.6g} gives CFL number {c:.4f} > {MAX_CFL}")
    return c


def _vec(ops, x, name):
    if x is None:
        return np.zeros(ops.ndof)
    x = np.asarray(x, dtype=float)
    if x.shape != (ops.ndof,):
        raise ShapeMismatch(f"{name} has shape {x.shape}, expected ({ops.ndof},)")
    return x


def _leapfrog(ops, z0, z1, loads, n, dt):
    K = ops.stiffness
    minv = 1.0 / ops.mass
    Z = np.empty((n + 1, ops.ndof))
    Z[0] = z0
    f0 = loads[0] if loads is not None else 0.0
    Z[1] = z0 + dt * z1 + 0.5 * dt * dt * minv * (f0 - K @ z0)
    dt2 = dt * dt
    for k in range(1, n):
        acc = -(K @ Z[k])
        if loads is not None:
            acc += loads[k]
        Z[k + 1] = 2.0 * Z[k] - Z[k - 1] + dt2 * minv * acc
        if not np.isfinite(Z[k + 1]).all():
            raise NonFiniteState(f"non-finite state at step {k + 1} (t={(k + 1) * dt:.6g})")
    if not np.isfinite(Z[1]).all():
        raise NonFiniteState("non-finite state after the start-up step")
    return Z


def velocities(ops, Z, loads, dt):
    """Velocity samples for a leapfrog trajectory; see the module docstring."""
    n = len(Z) - 1
    K = ops.stiffness
    minv = 1.0 / ops.mass
    V = np.empty_like(Z)
    f0 = loads[0] if loads is not None else 0.0
    fN = loads[n] if loads is not None else 0.0
    V[0] = (Z[1] - Z[0]) / dt + 0.5 * dt * minv * (K @ Z[0] - f0)
    V[n] = (Z[n] - Z[n - 1]) / dt + 0.5 * dt * minv * (fN - K @ Z[n])
    if n >= 2:
        V[1:n] = (Z[2:] - Z[:-2]) / (2.0 * dt)
    return V


def corrected_velocities(traj):
    """Velocity samples with the leapfrog dispersion factor removed (see module docstring)."""
    ops = traj.ops
    V = traj.velocities
    acc = (ops.stiffness @ V.T).T
    if traj.loads is not None and len(V) > 1:
        acc -= np.gradient(traj.loads, traj.dt, axis=0)
    return V + (traj.dt**2 / 8.0) * acc / ops.mass


def _forward(ops, z0, z1, loads, T, dt, scheme):
    times, dt = time_grid(T, dt)
    n = len(times) - 1
    c = _check_cfl(ops, dt)
    if loads is not None and loads.shape != (n + 1, ops.ndof):
        raise ShapeMismatch(f"load array has shape {loads.shape}, expected {(n + 1, ops.ndof)}")
    Z = _leapfrog(ops, z0, z1, loads, n, dt)
    V = velocities(ops, Z, loads, dt)
    V[0] = z1  # the start-up closure reproduces z1; store it without rounding
    meta = {"scheme": scheme, "dt": dt, "T": float(T), "cfl": c, "source": loads is not None}
    return Trajectory(times, Z, V, loads, ops, meta)


def solve_homogeneous(ops, z0, z1, T, dt):
    z0 = _vec(ops, z0, "z0")
    z1 = _vec(ops, z1, "z1")
    return _forward(ops, z0, z1, None, T, dt, "leapfrog")


def solve_forced(ops, z0, z1, loads, T, dt):
    """Forward solve with an explicit load sequence F^k (already multiplied by M)."""
    z0 = _vec(ops, z0, "z0")
    z1 = _vec(ops, z1, "z1")
    loads = None if loads is None else np.asarray(loads, dtype=float)
    return _forward(ops, z0, z1, loads, T, dt, "leapfrog-forced")


def solve_backward(ops, source, T, dt, as_load=False):
    """psi'' + K psi = g on (0, T) with psi(T) = psi'(T) = 0, by time reflection.

    ``source`` holds nodal values g^k (multiplied by the mass matrix here) or,
    with ``as_load=True``, load vectors used verbatim.
    """
    source = np.asarray(source, dtype=float)
    loads = source if as_load else source * ops.mass
    reflected = _forward(ops, np.zeros(ops.ndof), np.zeros(ops.ndof), loads[::-1].copy(), T, dt, "leapfrog")
    meta = dict(reflected.meta, scheme="leapfrog-backward")
    return Trajectory(
        reflected.times,
        reflected.states[::-1].copy(),
        -reflected.velocities[::-1],
        loads,
        ops,
        meta,
    )


def solve_controlled(ops, U0, U1, control, T, dt):
    """u'' + K u = zeta chi_omega; the control enters as the load M zeta."""
    loads = None if control is None else control.zeta * ops.mass
    return solve_forced(ops, U0, U1, loads, T, dt)


def time_weights(n, dt):
    w = np.full(n + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def space_time_inner(ops, a, b, dt):
    """sum_k w_k a^k . M b^k with trapezoid weights."""
    w = time_weights(len(a) - 1, dt)
    return float(np.einsum("k,ki,ki->", w, a * ops.mass, b))


def transposition_residual(ops, u, data, control, g):
    """Defect of the transposition identity for trajectory ``u`` against test source ``g``.

    LHS = sum_k w_k (u^k, g^k)_M; RHS = -(U0, psi'(0))_M + (U1, psi(0))_M
    + sum_k w_k (zeta^k, psi^k)_M, with psi the backward solution for g. The
    absolute defect is divided by the largest of the four terms.
    """
    U0, U1 = (_vec(ops, x, "data") for x in data)
    g = np.asarray(g, dtype=float)
    if g.shape != u.states.shape:
        raise ShapeMismatch(f"g has shape {g.shape}, expected {u.states.shape}")
    psi = solve_backward(ops, g, u.T, u.dt)
    lhs = space_time_inner(ops, u.states, g, u.dt)
    t0 = -float(U0 @ (ops.mass * psi.velocities[0]))
    t1 = float(U1 @ (ops.mass * psi.states[0]))
    t2 = 0.0 if control is None else space_time_inner(ops, control.zeta, psi.states, u.dt)
    scale = max(abs(lhs), abs(t0), abs(t1), abs(t2))
    if scale == 0.0:
        return 0.0
    return abs(lhs - (t0 + t1 + t2)) / scale


# --- export --------------------------------------------------------------------


def write_trajectory_csv(traj, path, every=1):
    """Rows ``t,node,comp,value`` for states on each component closure."""
    ops = traj.ops
    pair = traj.split_states()
    masks = (ops.domain.comp1_mask.ravel(), ops.domain.comp2_mask.ravel())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,node,comp,value\n")
        for k in range(0, len(traj.times), every):
            t = traj.times[k]
            for comp, (grid, mask) in enumerate(zip(pair, masks), start=1):
                flat = grid[k].ravel()
                for node in np.flatnonzero(mask):
                    fh.write(f"{t:.17g},{node},{comp},{flat[node]:.17g}\n")


def write_trajectory_binary(traj, path):
    ops = traj.ops
    shape = ops.domain.shape
    s, v = traj.split_states(), traj.split_velocities()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(shape)))
        fh.write(struct.pack(f"<{len(shape)}I", *shape))
        fh.write(struct.pack("<I", len(traj.times)))
        for block in (traj.times, s.comp1, s.comp2, v.comp1, v.comp2):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def read_trajectory_binary(path):
    """Returns dict with times, shape and the four (n_times, *grid) blocks."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}")
    version, dim = struct.unpack_from("<II", raw, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    off = 12
    shape = struct.unpack_from(f"<{dim}I", raw, off)
    off += 4 * dim
    (nt,) = struct.unpack_from("<I", raw, off)
    off += 4
    data = np.frombuffer(raw, dtype="<f8", offset=off)
    size = nt * int(np.prod(shape))
    times = data[:nt]
    blocks = [data[nt + i * size : nt + (i + 1) * size].reshape((nt,) + tuple(shape)) for i in range(4)]
    return {
        "times": times,
        "shape": tuple(shape),
        "state1": blocks[0],
        "state2": blocks[1],
        "velocity1": blocks[2],
        "velocity2": blocks[3],
    }
