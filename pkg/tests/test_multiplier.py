import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavehum.energy import energy_at
from wavehum.errors import RegionTooThin, ShapeMismatch
from wavehum.geometry import partition_boundary
from wavehum.material import affine
from wavehum.multiplier import (
    LHS_TERMS,
    RHS_TERMS,
    build_field,
    compute_S,
    multiplier_identity,
    smoothstep,
    smoothstep_slope,
    star_shaped_lower_bound,
    write_breakdown_csv,
)
from wavehum.observability import low_mode_data
from wavehum.wave_solver import solve_homogeneous

from conftest import make_ops, make_regions

X0_2 = np.array([0.5, 0.5])
OPS2 = make_ops(2, 32)
REG2 = make_regions(OPS2)
OPS1 = make_ops(1, 100)
REG1 = make_regions(OPS1, t1=0.1, t2=0.1)


def _ref_traj(ops, T=1.0, seed=7):
    z0, z1 = low_mode_data(ops, 1, 4, seed=seed)[0]
    return solve_homogeneous(ops, z0, z1, T, ops.stable_dt(0.5))


def test_radial_field():
    q = build_field("RadialM", OPS2.domain, x0=X0_2)
    for comp in (1, 2):
        vals, div, grad = q.comp(comp)
        mask = OPS2.component_mask(comp)
        assert np.all(div[mask] == 2.0)
        assert np.all(grad[mask] == np.eye(2))
        np.testing.assert_allclose(vals[mask], OPS2.domain.points.reshape(OPS2.domain.shape + (2,))[mask] - X0_2)


def test_boundary_tau_1d_endpoints():
    q = build_field("BoundaryTau", OPS1.domain, REG1, x0=[0.5])
    tau = q.values[0][..., 0]
    assert tau[0] == -1.0 and tau[-1] == 1.0
    assert np.max(np.abs(tau)) <= 1.0
    assert not np.any(tau[~REG1.omega1])
    assert not np.any(q.values[1])


def test_boundary_tau_2d_constraints():
    dom = OPS2.domain
    q = build_field("BoundaryTau", dom, REG2, x0=X0_2)
    tau = q.values[0]
    bf = dom.boundary_facets
    ends = tau.reshape(-1, 2)[bf.nodes]
    np.testing.assert_allclose(np.einsum("fek,fk->fe", ends, bf.normal), 1.0, atol=1e-14)
    assert np.max(np.abs(tau)) <= 1.0
    assert not np.any(tau[~REG2.omega1])


def test_tau_divergence_matches_finite_difference():
    dom = make_ops(2, 64).domain
    reg = make_regions(make_ops(2, 64))
    q = build_field("BoundaryTau", dom, reg, x0=X0_2)
    h = dom.h
    tau = q.values[0]
    fd = np.gradient(tau[..., 0], h, axis=0) + np.gradient(tau[..., 1], h, axis=1)
    inner = np.zeros(dom.shape, bool)
    inner[2:-2, 2:-2] = True
    sel = inner & reg.omega1
    assert np.max(np.abs(fd[sel] - q.divergence[0][sel])) < 0.05 * np.max(np.abs(q.divergence[0]))


def test_interface_mw_constraints():
    dom = OPS2.domain
    q = build_field("InterfaceMW", dom, REG2, x0=X0_2)
    w = q.params["w"]
    assert np.all(w[dom.gamma_mask] == 1.0)
    assert np.all((w >= 0) & (w <= 1))
    assert not np.any(w[dom.comp2_mask & ~REG2.omega2])
    m = dom.points.reshape(dom.shape + (2,)) - X0_2
    np.testing.assert_allclose(q.values[1], np.where(dom.comp2_mask[..., None], m * w[..., None], 0.0))
    assert not np.any(q.values[0])


def test_cutoff_p_constraints():
    dom = OPS2.domain
    T, dt = 4.0, OPS2.stable_dt(0.5)
    q = build_field("CutoffP", dom, REG2, x0=X0_2, params={"T": T, "dt": dt})
    inner1, inner2 = REG2.inner_regions(0.5)
    rho1, rho2 = q.values[0][..., 0], q.values[1][..., 0]
    assert np.all(rho1[inner1] == 1.0) and np.all(rho2[inner2] == 1.0)
    assert not np.any(rho1[dom.comp1_mask & ~REG2.omega1])
    assert not np.any(rho2[dom.comp2_mask & ~REG2.omega2])
    eps = q.params["eps"]
    assert eps == max(2 * dt, T / 20)
    t = np.linspace(eps, T - eps, 50)
    np.testing.assert_array_equal(q.eta(t), 1.0)
    assert q.eta(0.0) == 0.0 and q.eta(T) == 0.0
    # |grad p|^2 / p stays bounded where p > 0
    for rho, grad in ((rho1, q.gradient[0]), (rho2, q.gradient[1])):
        g2 = np.sum(grad[..., 0, :] ** 2, axis=-1)
        pos = rho > 1e-300
        assert np.all(np.isfinite(g2[pos] / rho[pos]))


def test_thin_ramp_rejected():
    dom = OPS2.domain
    reg = make_regions(OPS2, t1=2 * dom.h, t2=2 * dom.h)
    with pytest.raises(RegionTooThin):
        build_field("CutoffP", dom, reg, x0=X0_2, params={"T": 1.0, "dt": 0.01})


def test_tau_reaching_interface_rejected():
    ops = make_ops(2, 16)
    reg = make_regions(ops, t1=0.25)
    with pytest.raises(RegionTooThin):
        build_field("BoundaryTau", ops.domain, reg, x0=X0_2)


@given(st.floats(-0.5, 1.5))
def test_smoothstep_range(s):
    v = smoothstep(np.array([s]))[0]
    assert 0.0 <= v <= 1.0
    assert smoothstep_slope(np.array([s]))[0] >= 0.0


def test_identity_zero_trajectory():
    traj = solve_homogeneous(OPS1, None, None, 1.0, OPS1.stable_dt(0.5))
    q = build_field("RadialM", OPS1.domain, x0=[0.5])
    assert tuple(multiplier_identity(traj, q, OPS1)) == (0.0, 0.0, 0.0)


def test_identity_1d_radial_refines():
    res = []
    for r in (100, 200, 400):
        ops = make_ops(1, r)
        q = build_field("RadialM", ops.domain, x0=[0.5])
        res.append(multiplier_identity(_ref_traj(ops), q, ops).residual)
    assert res[0] > res[1] > res[2]
    assert res[2] <= 5e-2


@pytest.mark.parametrize("kind", ["RadialM", "BoundaryTau", "InterfaceMW", "CutoffP"])
def test_divergence_is_gradient_trace(kind):
    q = build_field(kind, OPS2.domain, REG2, x0=X0_2, params={"T": 4.0, "dt": 0.01})
    for div, grad in zip(q.divergence, q.gradient):
        np.testing.assert_allclose(div, np.trace(grad, axis1=-2, axis2=-1), atol=1e-12)


def test_identity_1d_cutoff_refines():
    # at 100 the error is about to change sign, so the asymptotic range starts at 200
    res = []
    for r in (200, 400, 800):
        ops = make_ops(1, r)
        reg = make_regions(ops, t1=0.125, t2=0.125)
        traj = _ref_traj(ops)
        q = build_field("CutoffP", ops.domain, reg, x0=[0.5], params={"T": traj.T, "dt": traj.dt})
        res.append(multiplier_identity(traj, q, ops).residual)
    assert res[0] > res[1] > res[2]
    assert res[2] <= 1e-4


def test_identity_1d_tangential_terms_vanish():
    traj = _ref_traj(OPS1)
    q = build_field("RadialM", OPS1.domain, x0=[0.5])
    out = multiplier_identity(traj, q, OPS1)
    assert out.terms["gamma_jump_tangential"] == 0.0


def test_tau_leaves_only_boundary_and_omega1_terms():
    traj = _ref_traj(OPS1)
    q = build_field("BoundaryTau", OPS1.domain, REG1, x0=[0.5])
    out = multiplier_identity(traj, q, OPS1)
    for name in ("gamma_normal", "gamma_jump_tangential", "gamma_velocity_tangential"):
        assert out.terms[name] == 0.0
    assert out.lhs == out.terms["sigma_normal"]
    # changing the solution inside the inclusion cannot affect any term
    n1 = OPS1.n1
    bump = np.zeros_like(traj.states)
    bump[:, n1:] = np.random.default_rng(0).standard_normal((len(bump), OPS1.ndof - n1))
    other = dataclasses.replace(traj, states=traj.states + bump, velocities=traj.velocities + bump)
    again = multiplier_identity(other, q, OPS1).terms
    for name, value in out.terms.items():
        assert again[name] == pytest.approx(value, rel=1e-12, abs=1e-15)
    assert out.residual < 0.05


def test_constant_coefficients_kill_coefficient_term():
    traj = _ref_traj(OPS2, T=0.5)
    q = build_field("RadialM", OPS2.domain, x0=X0_2)
    assert multiplier_identity(traj, q, OPS2).terms["volume_coeff"] == 0.0


def test_identity_variable_coefficients_2d():
    grad = np.zeros((2, 2, 2))
    grad[0, 0, 0] = grad[1, 1, 0] = 0.1
    ops = make_ops(2, 32, A=affine(np.eye(2), grad))
    traj = _ref_traj(ops, T=1.0)
    q = build_field("RadialM", ops.domain, x0=X0_2)
    out = multiplier_identity(traj, q, ops)
    assert out.terms["volume_coeff"] != 0.0
    assert out.residual < 0.05


def test_shape_mismatch():
    traj = _ref_traj(OPS1, T=0.2)
    q = build_field("RadialM", OPS2.domain, x0=X0_2)
    with pytest.raises(ShapeMismatch):
        multiplier_identity(traj, q, OPS1)


def test_S_zero_and_lower_bound(ref1d):
    s = ref1d
    zero = solve_homogeneous(s.ops, None, None, 1.0, s.dt)
    assert compute_S(zero, s.x0, s.ops) == (0.0, 0.0)
    traj = _ref_traj(s.ops, T=s.T)
    S, S_gamma = compute_S(traj, s.x0, s.ops)
    E0 = energy_at(s.ops, traj.states[0], traj.velocities[0]).total
    bound = star_shaped_lower_bound(s.material, s.R, s.n, s.T, E0)
    assert bound > 0
    assert S >= bound - 0.05 * abs(bound)
    assert math.isfinite(S_gamma)


def test_breakdown_csv(tmp_path):
    traj = _ref_traj(OPS1, T=0.5)
    out = multiplier_identity(traj, build_field("RadialM", OPS1.domain, x0=[0.5]), OPS1)
    write_breakdown_csv(out, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "side,term,value"
    names = [ln.split(",")[1] for ln in lines[1:]]
    assert names[: len(LHS_TERMS) + len(RHS_TERMS)] == list(LHS_TERMS + RHS_TERMS)
