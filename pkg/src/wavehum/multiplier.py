"""Multiplier vector fields and a term-by-term evaluation of the Rellich-type identity.

For a field q (allowed to differ between the two components) and a solution z
of the homogeneous problem, the identity reads ``lhs = rhs`` with

lhs (surface groups)
    sigma_normal               1/2 int_Sigma a_nn (dz1/dn)^2 q.n
    gamma_normal               1/2 sum_i int_Gamma a_nn (dz_i/dn_i)^2 q^i.n_i
    gamma_jump_tangential      -int_Gamma h (z1 - z2)(q^1.grad_s z1 - q^2.grad_s z2)
    gamma_velocity_tangential  1/2 sum_i int_Gamma (|z_i'|^2 - A grad_s z_i.grad_s z_i) q^i.n_i

rhs (volume and endpoint groups)
    endpoint      [(z', q.grad z)]_0^T
    volume_div    1/2 int int (|z'|^2 - A grad z.grad z) div q
    volume_grad   int int A grad z . (grad q) grad z
    volume_coeff  -1/2 int int q_k (d_k a_lj) d_l z d_j z

Surface integrals use facet midpoints, volume integrals the lumped nodal
weights of each component, time integrals the trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._fd import masked_gradient
from .discretization import facet_values
from .errors import RegionTooThin, ShapeMismatch
from .wave_solver import corrected_velocities, time_weights

_TINY = 1e-300
_CHUNK = 256


class FieldKind(str, Enum):
    RADIAL_M = "RadialM"
    BOUNDARY_TAU = "BoundaryTau"
    INTERFACE_MW = "InterfaceMW"
    CUTOFF_P = "CutoffP"


def smoothstep(s):
    """Quintic 0 -> 1 on [0, 1], C^2 at both ends, clipped outside."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def smoothstep_slope(s):
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, 30.0 * s * s * (1.0 - s) ** 2, 0.0)


@dataclass(frozen=True)
class VectorField:
    """Per-component nodal values (grid + (d,)), divergence (grid) and gradient (grid + (d, d)).

    ``gradient[..., k, j]`` is d q_k / d x_j. For CutoffP the spatial factor rho
    sits in ``values[..., 0]`` and the time factor is ``eta``.
    """

    kind: FieldKind
    values: tuple
    divergence: tuple
    gradient: tuple
    params: dict = field(default_factory=dict)
    eta: object = field(default=None, repr=False)

    def comp(self, i):
        return self.values[i - 1], self.divergence[i - 1], self.gradient[i - 1]


def _face_planes(facets, face_ids):
    """(axis, plane coordinate, outward sign) for each listed box face."""
    out = []
    for fid in face_ids:
        sel = np.flatnonzero(facets.face == fid)
        k = int(facets.axis[sel[0]])
        out.append((k, float(facets.centroid[sel[0], k]), float(facets.normal[sel[0], k])))
    return out


def _perp_distance(points, k, plane, sign):
    """Distance to a face plane measured into the side opposite to ``sign``."""
    return sign * (plane - points[:, k])


def _radial(domain, x0):
    pts = domain.points.reshape(domain.shape + (domain.dim,))
    m = pts - np.asarray(x0, float)
    d = domain.dim
    div = np.full(domain.shape, float(d))
    grad = np.broadcast_to(np.eye(d), domain.shape + (d, d)).copy()
    masks = (domain.comp1_mask, domain.comp2_mask)
    vals = tuple(np.where(mk[..., None], m, 0.0) for mk in masks)
    divs = tuple(np.where(mk, div, 0.0) for mk in masks)
    grads = tuple(np.where(mk[..., None, None], grad, 0.0) for mk in masks)
    return vals, divs, grads


def _check_ramp(width, h, name):
    if width < 2.0 * h - 1e-12:
        raise RegionTooThin(f"{name} ramp width {width:.6g} is below two cells ({2 * h:.6g})")


def _boundary_tau(domain, regions, partition):
    """tau = sum over active faces of n_f (1 - S(d_f / delta)); delta = thickness1."""
    delta = regions.thickness1
    _check_ramp(delta, domain.h, "tau")
    (ilo, ihi) = domain.inner_index
    gap = min(
        min(ilo[k] * domain.cell_size[k], (domain.resolution - ihi[k]) * domain.cell_size[k])
        for k in range(domain.dim)
    )
    if delta >= gap - 1e-12:
        raise RegionTooThin(f"omega1 thickness {delta:.6g} reaches the interface (gap {gap:.6g})")
    pts = domain.points
    d = domain.dim
    bf = domain.boundary_facets
    faces = np.unique(bf.face[partition.active])
    tau = np.zeros((len(pts), d))
    grad = np.zeros((len(pts), d, d))
    for k, plane, sign in _face_planes(bf, faces):
        s = _perp_distance(pts, k, plane, sign) / delta
        n = np.zeros(d)
        n[k] = sign
        tau += (1.0 - smoothstep(s))[:, None] * n
        # d s / dx = -n / delta
        grad += (smoothstep_slope(s) / delta)[:, None, None] * np.outer(n, n)
    tau = tau.reshape(domain.shape + (d,))
    grad = grad.reshape(domain.shape + (d, d))
    div = np.trace(grad, axis1=-2, axis2=-1)
    m1 = domain.comp1_mask
    z2 = domain.comp2_mask
    vals = (np.where(m1[..., None], tau, 0.0), np.zeros_like(tau))
    divs = (np.where(m1, div, 0.0), np.zeros_like(div))
    grads = (np.where(m1[..., None, None], grad, 0.0), np.zeros_like(grad))
    del z2
    return vals, divs, grads


def _product_ramp(pts, planes, start, width):
    """1 - prod_f S((d_f - start) / width) and its gradient; d_f measured inward."""
    n = len(pts)
    d = pts.shape[1]
    S = []
    dS = []
    for k, plane, sign in planes:
        s = (_perp_distance(pts, k, plane, sign) - start) / width
        nrm = np.zeros(d)
        nrm[k] = sign
        S.append(smoothstep(s))
        dS.append(-(smoothstep_slope(s) / width)[:, None] * nrm)
    prod = np.ones(n)
    for s in S:
        prod = prod * s
    grad = np.zeros((n, d))
    for f in range(len(S)):
        others = np.ones(n)
        for g in range(len(S)):
            if g != f:
                others = others * S[g]
        grad += dS[f] * others[:, None]
    return 1.0 - prod, -grad


def _interface_mw(domain, regions, x0):
    """q = m w on component 2, 0 on component 1; w = 1 on Gamma, support within delta = thickness2."""
    delta = regions.thickness2
    _check_ramp(delta, domain.h, "w")
    pts = domain.points
    d = domain.dim
    gf = domain.interface_facets
    # outward normal of the inclusion is -n1; distance measured into the inclusion
    planes = [(k, plane, -sign) for k, plane, sign in _face_planes(gf, np.unique(gf.face))]
    w, gw = _product_ramp(pts, planes, 0.0, delta)
    m = pts - np.asarray(x0, float)
    q = m * w[:, None]
    grad = np.eye(d)[None] * w[:, None, None] + m[:, :, None] * gw[:, None, :]
    div = np.trace(grad, axis1=1, axis2=2)
    shp = domain.shape
    mk = domain.comp2_mask
    vals = (np.zeros(shp + (d,)), np.where(mk[..., None], q.reshape(shp + (d,)), 0.0))
    divs = (np.zeros(shp), np.where(mk, div.reshape(shp), 0.0))
    grads = (np.zeros(shp + (d, d)), np.where(mk[..., None, None], grad.reshape(shp + (d, d)), 0.0))
    return vals, divs, grads, np.where(mk, w.reshape(shp), 0.0)


def eta_profile(T, eps):
    """eta(t) = S(t/eps) S((T - t)/eps): 1 on [eps, T - eps], 0 at both ends."""

    def eta(t):
        t = np.asarray(t, float)
        return smoothstep(t / eps) * smoothstep((T - t) / eps)

    return eta


def _cutoff_p(domain, regions, partition, T, dt):
    """rho = 1 on the half-thickness regions, 0 outside omega1 u omega2; p = eta(t) rho(x)."""
    t1, t2 = regions.thickness1, regions.thickness2
    _check_ramp(0.5 * t1, domain.h, "rho (omega1)")
    _check_ramp(0.5 * t2, domain.h, "rho (omega2)")
    pts = domain.points
    d = domain.dim
    shp = domain.shape
    bf = domain.boundary_facets
    gf = domain.interface_facets
    out_planes = _face_planes(bf, np.unique(bf.face[partition.active]))
    in_planes = [(k, plane, -sign) for k, plane, sign in _face_planes(gf, np.unique(gf.face))]
    if out_planes:
        r1, g1 = _product_ramp(pts, out_planes, 0.5 * t1, 0.5 * t1)
    else:
        r1, g1 = np.zeros(len(pts)), np.zeros((len(pts), d))
    r2, g2 = _product_ramp(pts, in_planes, 0.5 * t2, 0.5 * t2)
    m1, m2 = domain.comp1_mask, domain.comp2_mask
    vals, grads = [], []
    for r, g, mk in ((r1, g1, m1), (r2, g2, m2)):
        v = np.zeros(shp + (d,))
        v[..., 0] = np.where(mk, r.reshape(shp), 0.0)
        gr = np.zeros(shp + (d, d))
        gr[..., 0, :] = np.where(mk[..., None], g.reshape(shp + (d,)), 0.0)
        vals.append(v)
        grads.append(gr)
    # consistent data for (rho, 0, ...) so the field can also be fed to the vector identity
    divs = tuple(gr[..., 0, 0].copy() for gr in grads)
    eps = max(2.0 * dt, T / 20.0)
    return tuple(vals), divs, tuple(grads), eta_profile(T, eps), eps


def build_field(kind, domain, regions=None, x0=None, params=None, partition=None):
    """Construct one of the four multiplier fields; ``params`` carries T and dt for CutoffP."""
    kind = FieldKind(kind)
    params = dict(params or {})
    if kind is FieldKind.RADIAL_M:
        vals, divs, grads = _radial(domain, x0)
        return VectorField(kind, vals, divs, grads, {"x0": list(np.atleast_1d(x0))})
    if regions is None:
        raise ValueError(f"{kind.value} needs control regions")
    if partition is None:
        from .geometry import partition_boundary

        partition = partition_boundary(domain, x0)
    if kind is FieldKind.BOUNDARY_TAU:
        vals, divs, grads = _boundary_tau(domain, regions, partition)
        return VectorField(kind, vals, divs, grads, {"delta": regions.thickness1})
    if kind is FieldKind.INTERFACE_MW:
        vals, divs, grads, w = _interface_mw(domain, regions, x0)
        return VectorField(kind, vals, divs, grads, {"delta": regions.thickness2, "w": w})
    vals, divs, grads, eta, eps = _cutoff_p(domain, regions, partition, params["T"], params["dt"])
    return VectorField(kind, vals, divs, grads, {"eps": eps, "T": params["T"]}, eta=eta)


# --- identity ------------------------------------------------------------------

LHS_TERMS = ("sigma_normal", "gamma_normal", "gamma_jump_tangential", "gamma_velocity_tangential")
RHS_TERMS = ("endpoint", "volume_div", "volume_grad", "volume_coeff")


@dataclass(frozen=True)
class IdentityResult:
    lhs: float
    rhs: float
    residual: float
    terms: dict

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.residual))


def _facet_field(values, facets):
    flat = values.reshape(-1, values.shape[-1])
    return flat[facets.nodes].mean(axis=1)


def _volume_terms(ops, Z, V, q, w_t):
    """Trapezoid-in-time sums of the three volume integrands for both components."""
    dom = ops.domain
    out = {"volume_div": 0.0, "volume_grad": 0.0, "volume_coeff": 0.0}
    d = dom.dim
    for comp in (1, 2):
        qv, qdiv, qgrad = q.comp(comp)
        mask = ops.component_mask(comp)
        wx = ops.nodal_weights(comp)
        A = ops.material.A(comp)
        dA = ops.material.dA(comp)
        coeff = np.einsum("...k,...ljk->...lj", qv, dA)
        for a in range(0, len(Z), _CHUNK):
            b = min(a + _CHUNK, len(Z))
            z = ops.split(Z[a:b])[comp - 1]
            v = ops.split(V[a:b])[comp - 1]
            g = masked_gradient(z, mask, dom.cell_size, lead=1)
            Ag = np.einsum("...lj,t...l->t...j", A, g)
            AgG = np.einsum("t...j,t...j->t...", Ag, g)
            wt = w_t[a:b]
            grad_term = np.einsum("t...j,...kj,t...k->t...", Ag, qgrad, g)
            coeff_term = np.einsum("...lj,t...l,t...j->t...", coeff, g, g)
            ax = tuple(range(1, d + 1))
            out["volume_div"] += float(np.sum(wt * np.sum(wx * 0.5 * (v * v - AgG) * qdiv, axis=ax)))
            out["volume_grad"] += float(np.sum(wt * np.sum(wx * grad_term, axis=ax)))
            out["volume_coeff"] += float(np.sum(wt * np.sum(wx * -0.5 * coeff_term, axis=ax)))
    return out


def _endpoint_term(ops, Z, V, q):
    dom = ops.domain
    total = 0.0
    for sgn, k in ((-1.0, 0), (1.0, len(Z) - 1)):
        for comp in (1, 2):
            qv = q.comp(comp)[0]
            z = ops.split(Z[k])[comp - 1]
            v = ops.split(V[k])[comp - 1]
            g = masked_gradient(z, ops.component_mask(comp), dom.cell_size)
            total += sgn * float(np.sum(ops.nodal_weights(comp) * v * np.einsum("...k,...k->...", qv, g)))
    return total


def _surface_terms(ops, Z, V, q, w_t):
    dom = ops.domain
    bf = dom.boundary_facets
    gf = dom.interface_facets
    out = {}
    # exterior boundary: z1 = 0, so only the normal derivative survives
    sb = facet_values(ops, Z, bf, 1)
    qn = np.einsum("fk,fk->f", _facet_field(q.values[0], bf), bf.normal)
    out["sigma_normal"] = float(w_t @ (0.5 * (sb.Ann * sb.normal_derivative**2 * qn) @ bf.measure))

    h = ops.material.h
    normal_sum = 0.0
    vel_sum = 0.0
    qt = []
    jump = 0.0
    for comp, sgn in ((1, 1.0), (2, -1.0)):
        s = facet_values(ops, Z, gf, comp)
        sv = facet_values(ops, V, gf, comp)
        qf = _facet_field(q.values[comp - 1], gf)
        qn = sgn * np.einsum("fk,fk->f", qf, gf.normal)
        normal_sum = normal_sum + 0.5 * s.Ann * s.normal_derivative**2 * qn
        dtan2 = np.einsum("...fk,...fk->...f", s.tangential, s.tangential)
        vel_sum = vel_sum + 0.5 * (sv.value**2 - s.A_tt * dtan2) * qn
        qt.append(np.einsum("fk,...fk->...f", qf, s.tangential))
        jump = jump + sgn * s.value
    out["gamma_normal"] = float(w_t @ (normal_sum @ gf.measure))
    out["gamma_jump_tangential"] = float(w_t @ ((-h * jump * (qt[0] - qt[1])) @ gf.measure))
    out["gamma_velocity_tangential"] = float(w_t @ (vel_sum @ gf.measure))
    return out


def multiplier_identity(traj, q, ops=None):
    """Both sides of the identity for multiplier field ``q`` along a homogeneous trajectory."""
    ops = traj.ops if ops is None else ops
    if traj.states.shape[-1] != ops.ndof:
        raise ShapeMismatch("trajectory does not match the operators")
    if q.values[0].shape[:-1] != ops.domain.shape:
        raise ShapeMismatch("field grid does not match the operators")
    Z = traj.states
    V = corrected_velocities(traj)
    w_t = time_weights(len(Z) - 1, traj.dt)
    terms = _surface_terms(ops, Z, V, q, w_t)
    terms["endpoint"] = _endpoint_term(ops, Z, V, q)
    terms.update(_volume_terms(ops, Z, V, q, w_t))
    lhs = sum(terms[t] for t in LHS_TERMS)
    rhs = sum(terms[t] for t in RHS_TERMS)
    residual = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + _TINY)
    if lhs == 0.0 and rhs == 0.0:
        residual = 0.0
    return IdentityResult(lhs, rhs, residual, terms)


def compute_S(traj, x0, ops=None):
    """(S, S_Gamma) with q = x - x0: all surface groups, and the three Gamma groups."""
    ops = traj.ops if ops is None else ops
    q = build_field(FieldKind.RADIAL_M, ops.domain, x0=x0)
    res = multiplier_identity(traj, q, ops)
    s_gamma = sum(res.terms[t] for t in LHS_TERMS[1:])
    return res.lhs, s_gamma


def star_shaped_lower_bound(material, R, n, T, E0):
    """[T (1 - n R M / alpha) - 2 max(R / sqrt(alpha), (n - 1) sqrt(alpha) / (2 h0))] E0."""
    a = material.alpha
    t0a = 2.0 * max(R / np.sqrt(a), (n - 1) * np.sqrt(a) / (2.0 * material.h0))
    return (T * (1.0 - n * R * material.M / a) - t0a) * E0


def write_breakdown_csv(result, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("side,term,value\n")
        for t in LHS_TERMS:
            fh.write(f"lhs,{t},{result.terms[t]:.17g}\n")
        for t in RHS_TERMS:
            fh.write(f"rhs,{t},{result.terms[t]:.17g}\n")
        fh.write(f"total,lhs,{result.lhs:.17g}\n")
        fh.write(f"total,rhs,{result.rhs:.17g}\n")
        fh.write(f"total,residual,{result.residual:.17g}\n")
