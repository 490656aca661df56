"""Finite-difference assembly of the two-component bilinear form.

Degrees of freedom: component 1 lives on the closure of Omega1 minus the Dirichlet
boundary, component 2 on the closed inclusion. Gamma nodes therefore appear
twice, once per side, and are coupled only through the interface term
h (u1 - u2)(v1 - v2).

Each component's energy is a corner quadrature over its cells: at every cell
corner the gradient sample takes, for axis k, the difference along the cell
edge in direction k through that corner. For diagonal A this reproduces the
3-point (1D) / 5-point (2D) variable-coefficient stencils; off-diagonal entries
pick up the diagonal neighbours. The stiffness matrix is G^T W G, hence
symmetric positive semi-definite by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from ._fd import masked_gradient
from .errors import ShapeMismatch


class PairField(NamedTuple):
    """Grid arrays for the two components (zero outside each closure)."""

    comp1: np.ndarray
    comp2: np.ndarray


class FacetValues(NamedTuple):
    """Per-facet traces; every array has shape (..., F) (plus (..., F, d) for vectors)."""

    value: np.ndarray
    normal_derivative: np.ndarray
    tangential: np.ndarray
    conormal: np.ndarray
    Ann: np.ndarray
    A_tt: np.ndarray


class InterfaceRecord(NamedTuple):
    jump: np.ndarray
    conormal1: np.ndarray
    conormal2: np.ndarray
    tangential1: np.ndarray
    tangential2: np.ndarray


def _cells(domain, comp):
    """Lower-corner multi-indices (n_cells, d) of cells belonging to ``comp``."""
    r = domain.resolution
    d = domain.dim
    idx = np.indices((r,) * d).reshape(d, -1).T
    ilo, ihi = domain.inner_index
    inside = np.all((idx >= np.asarray(ilo)) & (idx < np.asarray(ihi)), axis=1)
    return idx[inside] if comp == 2 else idx[~inside]


@dataclass
class DiscreteOperators:
    domain: object
    material: object
    dof1: np.ndarray = field(repr=False)
    dof2: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    stiffness: sp.csr_matrix = field(repr=False)
    K1: sp.csr_matrix = field(repr=False)
    K2: sp.csr_matrix = field(repr=False)
    P: sp.csr_matrix = field(repr=False)
    w1: np.ndarray = field(repr=False)
    w2: np.ndarray = field(repr=False)
    gamma_nodes: np.ndarray = field(repr=False)
    gamma_weight: np.ndarray = field(repr=False)

    @property
    def ndof(self):
        return len(self.mass)

    @property
    def n1(self):
        return int(np.sum(self.dof1 >= 0))

    @property
    def dirichlet_mask(self):
        return self.domain.boundary_mask

    # --- layout -----------------------------------------------------------------
    def split(self, u):
        """Vector(s) of shape (..., ndof) -> PairField of grid arrays (..., *grid)."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.ndof:
            raise ShapeMismatch(f"expected trailing size {self.ndof}, got {u.shape}")
        lead = u.shape[:-1]
        shape = self.domain.shape
        out = []
        for dof in (self.dof1, self.dof2):
            g = np.zeros(lead + (int(np.prod(shape)),))
            flat = dof.ravel()
            sel = flat >= 0
            g[..., sel] = u[..., flat[sel]]
            out.append(g.reshape(lead + shape))
        return PairField(*out)

    def join(self, comp1, comp2):
        """Inverse of :meth:`split`; values on the Dirichlet boundary are dropped."""
        comp1 = np.asarray(comp1, dtype=float)
        comp2 = np.asarray(comp2, dtype=float)
        shape = self.domain.shape
        lead = comp1.shape[: comp1.ndim - len(shape)]
        u = np.zeros(lead + (self.ndof,))
        for dof, g in ((self.dof1, comp1), (self.dof2, comp2)):
            if g.shape[len(lead):] != shape:
                raise ShapeMismatch(f"component shape {g.shape} does not match grid {shape}")
            flat = dof.ravel()
            sel = flat >= 0
            u[..., flat[sel]] = g.reshape(lead + (-1,))[..., sel]
        return u

    def sample(self, f1, f2=None):
        """Nodal vector from functions of points (P, d); ``f2`` defaults to ``f1``."""
        f2 = f1 if f2 is None else f2
        pts = self.domain.points
        shape = self.domain.shape
        return self.join(np.asarray(f1(pts), float).reshape(shape), np.asarray(f2(pts), float).reshape(shape))

    def component_mask(self, comp):
        return self.domain.comp1_mask if comp == 1 else self.domain.comp2_mask

    def nodal_weights(self, comp):
        return self.w1 if comp == 1 else self.w2

    def mass_of_mask(self, mask1, mask2):
        """Diagonal mass restricted to nodes in the given grid masks, as a dof vector."""
        return self.mass * self.join(mask1.astype(float), mask2.astype(float))

    # --- forms ------------------------------------------------------------------
    def bilinear_form(self, u, v):
        return bilinear_form(self, u, v)

    def energy_parts(self, u, v=None):
        """Gauss-Green pieces of <K u, v>: elastic per component and interface."""
        v = u if v is None else v
        return {
            "elastic1": float(u @ (self.K1 @ v)),
            "elastic2": float(u @ (self.K2 @ v)),
            "interface": float(u @ (self.P @ v)),
        }

    def spectral_radius_bound(self):
        """Gershgorin bound on the spectrum of M^{-1} K."""
        K = self.stiffness
        rowsum = np.asarray(abs(K).sum(axis=1)).ravel()
        return float(np.max(rowsum / self.mass))

    def stable_dt(self, cfl):
        """Time step ``cfl`` times the leapfrog stability limit 2 / sqrt(rho(M^{-1}K))."""
        return cfl * 2.0 / np.sqrt(self.spectral_radius_bound())

    # --- traces -----------------------------------------------------------------
    def facet_values(self, u, facets, comp):
        return facet_values(self, u, facets, comp)

    def interface_quantities(self, u):
        return interface_quantities(self, u)

    def export_triplets(self, path, which="stiffness"):
        """Write ``row col value`` lines ("%.17g") for the stiffness or mass matrix."""
        if which == "stiffness":
            mat = sp.coo_matrix(self.stiffness)
        elif which == "mass":
            mat = sp.coo_matrix(sp.diags(self.mass))
        else:
            raise ValueError(f"unknown operator {which!r}")
        order = np.lexsort((mat.col, mat.row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {which} {mat.shape[0]} {mat.shape[1]} {mat.nnz}\n")
            for r, c, v in zip(mat.row[order], mat.col[order], mat.data[order]):
                fh.write(f"{r} {c} {v:.17g}\n")


def read_triplets(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        n, m = int(header[2]), int(header[3])
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((n, m))
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, m))


def assemble(domain, material):
    d = domain.dim
    shape = domain.shape
    nnodes = int(np.prod(shape))
    h = domain.cell_size
    vol = domain.cell_volume

    free1 = domain.comp1_mask & ~domain.boundary_mask
    dof1 = np.full(shape, -1, dtype=int)
    dof1[free1] = np.arange(int(free1.sum()))
    n1 = int(free1.sum())
    dof2 = np.full(shape, -1, dtype=int)
    dof2[domain.comp2_mask] = n1 + np.arange(int(domain.comp2_mask.sum()))
    ndof = n1 + int(domain.comp2_mask.sum())

    corners = np.indices((2,) * d).reshape(d, -1).T  # (2^d, d) offsets
    weights = {1: np.zeros(nnodes), 2: np.zeros(nnodes)}
    Kc = {}
    for comp, dof in ((1, dof1), (2, dof2)):
        cells = _cells(domain, comp)
        A = material.A(comp).reshape(nnodes, d, d)
        rows_k = [[] for _ in range(d)]
        cols_k = [[] for _ in range(d)]
        vals_k = [[] for _ in range(d)]
        qA = []
        nq = 0
        for off in corners:
            node = cells + off
            node_flat = np.ravel_multi_index(tuple(node.T), shape)
            np.add.at(weights[comp], node_flat, vol / 2**d)
            qA.append(A[node_flat])
            for k in range(d):
                lo = node.copy()
                lo[:, k] = cells[:, k]
                hi = lo.copy()
                hi[:, k] += 1
                q = nq + np.arange(len(cells))
                for nodes_, sgn in ((hi, 1.0), (lo, -1.0)):
                    cols = dof.ravel()[np.ravel_multi_index(tuple(nodes_.T), shape)]
                    keep = cols >= 0
                    rows_k[k].append(q[keep])
                    cols_k[k].append(cols[keep])
                    vals_k[k].append(np.full(keep.sum(), sgn / h[k]))
            nq += len(cells)
        qA = np.concatenate(qA)
        wq = vol / 2**d
        G = [
            sp.csr_matrix(
                (np.concatenate(vals_k[k]), (np.concatenate(rows_k[k]), np.concatenate(cols_k[k]))),
                shape=(nq, ndof),
            )
            for k in range(d)
        ]
        K = sp.csr_matrix((ndof, ndof))
        for k in range(d):
            for l in range(d):
                K = K + G[k].T @ sp.diags(wq * qA[:, k, l]) @ G[l]
        Kc[comp] = K.tocsr()

    # interface coupling lumped to Gamma nodes: each facet hands half of h*|f| to each endpoint
    gf = domain.interface_facets
    gw = np.zeros(nnodes)
    share = gf.measure * material.h / gf.nodes.shape[1]
    for col in range(gf.nodes.shape[1]):
        np.add.at(gw, gf.nodes[:, col], share)
    gnodes = np.flatnonzero(gw > 0)
    gweight = gw[gnodes]
    e1 = dof1.ravel()[gnodes]
    e2 = dof2.ravel()[gnodes]
    rows = np.concatenate([e1, e2, e1, e2])
    cols = np.concatenate([e1, e2, e2, e1])
    vals = np.concatenate([gweight, gweight, -gweight, -gweight])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(ndof, ndof))

    mass = np.zeros(ndof)
    mass[dof1.ravel()[free1.ravel()]] = weights[1][free1.ravel()]
    m2 = domain.comp2_mask.ravel()
    mass[dof2.ravel()[m2]] = weights[2][m2]

    K = (Kc[1] + Kc[2] + P).tocsr()
    # exact symmetry (assembly sums can differ in the last bit)
    K = ((K + K.T) * 0.5).tocsr()
    K.sum_duplicates()
    return DiscreteOperators(
        domain=domain,
        material=material,
        dof1=dof1,
        dof2=dof2,
        mass=mass,
        stiffness=K,
        K1=Kc[1],
        K2=Kc[2],
        P=P,
        w1=weights[1].reshape(shape),
        w2=weights[2].reshape(shape),
        gamma_nodes=gnodes,
        gamma_weight=gweight,
    )


def bilinear_form(ops, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (ops.ndof,) or v.shape != (ops.ndof,):
        raise ShapeMismatch(f"expected vectors of length {ops.ndof}, got {u.shape} and {v.shape}")
    return float(u @ (ops.stiffness @ v))


def _walk(domain, nodes, axis, step):
    """Flat indices of ``nodes`` moved ``step`` cells along ``axis`` (vectorised over nodes)."""
    mi = np.array(np.unravel_index(nodes, domain.shape))
    mi[axis, np.arange(len(nodes))] += step
    return np.ravel_multi_index(tuple(mi), domain.shape)


def facet_values(ops, u, facets, comp):
    """Traces of component ``comp`` on ``facets``, evaluated at facet midpoints.

    The normal is ``n_comp``: the stored facet normal for component 1, its
    negative for component 2. Normal derivatives are second-order one-sided
    differences into the component, averaged over the facet endpoints;
    tangential derivatives are the difference along the facet. Leading axes of
    ``u`` (e.g. time) are kept.
    """
    dom = ops.domain
    grid = ops.split(u)[comp - 1]
    lead = grid.shape[: grid.ndim - dom.dim]
    g = grid.reshape(lead + (-1,))
    A = ops.material.A(comp).reshape(-1, dom.dim, dom.dim)
    sgn = 1.0 if comp == 1 else -1.0
    normal = sgn * facets.normal
    hk = dom.cell_size[facets.axis]
    nend = facets.nodes.shape[1]
    value = 0.0
    dn = 0.0
    Amid = 0.0
    for col in range(nend):
        p = facets.nodes[:, col]
        # step into the component: opposite to the outward normal n_comp
        step = -(sgn * facets.sign).astype(int)
        p1 = _walk(dom, p, facets.axis, step)
        p2 = _walk(dom, p, facets.axis, 2 * step)
        value = value + g[..., p] / nend
        dn = dn + (3.0 * (g[..., p] - g[..., p1]) - (g[..., p1] - g[..., p2])) / (2.0 * hk) / nend
        Amid = Amid + A[p] / nend
    dim = dom.dim
    if dim == 1 or nend == 1:
        dt = np.zeros(lead + (len(facets),))
        tvec = np.zeros((len(facets), dim))
    else:
        other = 1 - facets.axis
        tvec = np.zeros((len(facets), dim))
        tvec[np.arange(len(facets)), other] = 1.0
        dt = (g[..., facets.nodes[:, 1]] - g[..., facets.nodes[:, 0]]) / dom.cell_size[other]
    grad = dn[..., None] * normal + dt[..., None] * tvec
    tangential = dt[..., None] * tvec
    conormal = np.einsum("fij,...fj,fi->...f", Amid, grad, normal)
    Ann = np.einsum("fij,fi,fj->f", Amid, normal, normal)
    A_tt = np.einsum("fij,fi,fj->f", Amid, tvec, tvec)
    return FacetValues(value, dn, tangential, conormal, Ann, A_tt)


def interface_quantities(ops, u):
    """Per-Gamma-facet jump, one-sided conormal derivatives, tangential gradients."""
    f = ops.domain.interface_facets
    s1 = facet_values(ops, u, f, 1)
    s2 = facet_values(ops, u, f, 2)
    return InterfaceRecord(
        jump=s1.value - s2.value,
        conormal1=s1.conormal,
        conormal2=s2.conormal,
        tangential1=s1.tangential,
        tangential2=s2.tangential,
    )


def interface_flux(ops, u):
    """Discrete flux carried by the interface coupling at each Gamma node, per side.

    Side 1 receives -h(u1 - u2) and side 2 receives +h(u1 - u2) (node-lumped);
    the two always cancel, which is the discrete form of flux continuity.
    """
    split = ops.split(u)
    nodes = ops.gamma_nodes
    jump = split.comp1.reshape(split.comp1.shape[: -ops.domain.dim] + (-1,))[..., nodes] - split.comp2.reshape(
        split.comp2.shape[: -ops.domain.dim] + (-1,)
    )[..., nodes]
    flux = ops.gamma_weight * jump
    return -flux, flux


def nodal_gradient(ops, u, comp, lead=0):
    """Second-order gradient of component ``comp`` on its closure; shape (..., *grid, d)."""
    grid = ops.split(u)[comp - 1]
    return masked_gradient(grid, ops.component_mask(comp), ops.domain.cell_size, lead=lead)


def eigenmodes(ops, k):
    """Lowest ``k`` generalised eigenpairs K phi = lam M phi, M-orthonormal, ascending.

    Signs are fixed so that sum_i M_i phi_i w(x_i) > 0 for a fixed positive,
    non-symmetric weight w, which makes modes comparable across resolutions.
    """
    import scipy.sparse.linalg as sla

    k = int(min(k, ops.ndof - 1))
    s = sp.diags(1.0 / np.sqrt(ops.mass))
    S = (s @ ops.stiffness @ s).tocsc()
    if ops.ndof <= 400:
        lam, vec = np.linalg.eigh(S.toarray())
        lam, vec = lam[:k], vec[:, :k]
    else:
        lam, vec = sla.eigsh(S, k=k, sigma=-1e-8, which="LM")
    order = np.argsort(lam)
    lam, vec = lam[order], vec[:, order]
    phi = (s @ vec).T
    pts = ops.domain.points
    weight = np.exp(0.37 * pts.sum(axis=1) + 0.11 * pts[:, 0]) * (1.0 + pts[:, 0])
    wvec = ops.join(weight.reshape(ops.domain.shape), weight.reshape(ops.domain.shape))
    sgn = np.sign(phi @ (ops.mass * wvec))
    sgn[sgn == 0] = 1.0
    return lam, phi * sgn[:, None]
