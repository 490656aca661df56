"""Coefficient field A(x), interface coefficient h, and the constants alpha, beta, M, h0."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._fd import masked_gradient
from .errors import NonPositiveH, NotElliptic, NotSymmetric


@dataclass(frozen=True)
class CoefficientField:
    """A(x) per component: ``func(points, comp) -> (P, d, d)`` with ``comp`` in {1, 2}."""

    family: str
    params: dict
    func: object = field(repr=False)

    def __call__(self, points, comp):
        return self.func(np.atleast_2d(points), comp)


def identity_scaled(c=1.0):
    def func(points, comp):
        d = points.shape[1]
        return np.broadcast_to(c * np.eye(d), (len(points), d, d)).copy()

    return CoefficientField("identity-scaled", {"c": float(c)}, func)


def affine(c0, grad):
    """a_ij(x) = c0_ij + sum_k grad_ijk x_k."""
    c0 = np.atleast_2d(np.asarray(c0, dtype=float))
    grad = np.asarray(grad, dtype=float)
    d = c0.shape[0]
    grad = grad.reshape(d, d, d)

    def func(points, comp):
        return c0[None] + np.einsum("ijk,pk->pij", grad, points)

    return CoefficientField("affine", {"c0": c0.tolist(), "grad": grad.tolist()}, func)


def checkerboard(c1, c2):
    """Constant isotropic coefficient, ``c1`` on Omega1 and ``c2`` on Omega2."""

    def func(points, comp):
        d = points.shape[1]
        c = c1 if comp == 1 else c2
        return np.broadcast_to(c * np.eye(d), (len(points), d, d)).copy()

    return CoefficientField("checkerboard", {"c1": float(c1), "c2": float(c2)}, func)


@dataclass(frozen=True)
class MaterialData:
    A1: np.ndarray = field(repr=False)
    A2: np.ndarray = field(repr=False)
    dA1: np.ndarray = field(repr=False)
    dA2: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    alpha: float
    beta: float
    M: float
    h0: float
    description: dict = field(default_factory=dict)

    def A(self, comp):
        return self.A1 if comp == 1 else self.A2

    def dA(self, comp):
        """dA[..., l, j, k] = d a_lj / d x_k sampled on the grid."""
        return self.dA1 if comp == 1 else self.dA2


def _as_h_values(h_spec, centroids):
    if callable(h_spec):
        vals = np.asarray(h_spec(centroids), dtype=float)
    else:
        vals = np.full(len(centroids), float(h_spec))
    return vals.reshape(len(centroids))


def validate_material(domain, A_spec, h_spec, probe_count=16, seed=0):
    """Sample A on both component closures and h on Gamma facets; check the hypotheses.

    alpha and beta come from exact symmetric eigenvalues at every node; M from
    second-order finite differences of each entry inside each component (exact
    for affine entries). ``probe_count`` random directions per run are used as a
    redundant check of the two quadratic bounds.
    """
    if not isinstance(A_spec, CoefficientField):
        A_spec = CoefficientField("callable", {}, A_spec)
    pts = domain.points
    shape = domain.shape
    d = domain.dim
    comps = {}
    for comp, mask in ((1, domain.comp1_mask), (2, domain.comp2_mask)):
        A = np.zeros(shape + (d, d))
        sel = mask.ravel()
        vals = np.asarray(A_spec(pts[sel], comp), dtype=float).reshape(-1, d, d)
        A.reshape(-1, d, d)[sel] = vals
        asym = np.max(np.abs(vals - np.swapaxes(vals, 1, 2)))
        if asym > 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
            raise NotSymmetric(f"A is not symmetric on component {comp} (defect {asym:.3g})")
        comps[comp] = (A, vals)

    eig = np.concatenate([np.linalg.eigvalsh(v) for _, v in comps.values()])
    alpha = float(eig.min())
    beta = float(np.max(np.abs(eig)))
    if alpha <= 0.0:
        raise NotElliptic(f"smallest eigenvalue of A is {alpha:.6g}")

    rng = np.random.default_rng(seed)
    for _, vals in comps.values():
        lam = rng.standard_normal((probe_count, d))
        lam /= np.linalg.norm(lam, axis=1, keepdims=True)
        quad = np.einsum("pij,qi,qj->pq", vals, lam, lam)
        norm = np.linalg.norm(np.einsum("pij,qj->pqi", vals, lam), axis=2)
        assert quad.min() >= alpha * (1 - 1e-12) - 1e-14
        assert norm.max() <= beta * (1 + 1e-12) + 1e-14

    dA = {}
    M = 0.0
    for comp, mask in ((1, domain.comp1_mask), (2, domain.comp2_mask)):
        g = masked_gradient(comps[comp][0], mask, domain.cell_size)
        dA[comp] = g
        M = max(M, float(np.max(np.abs(g))))

    h = _as_h_values(h_spec, domain.interface_facets.centroid)
    if not np.all(np.isfinite(h)) or h.min() <= 0.0:
        raise NonPositiveH(f"interface coefficient has minimum {h.min():.6g}")

    desc = {"family": A_spec.family, "params": A_spec.params}
    if not callable(h_spec):
        desc["h"] = float(h_spec)
    return MaterialData(
        A1=comps[1][0],
        A2=comps[2][0],
        dA1=dA[1],
        dA2=dA[2],
        h=h,
        alpha=alpha,
        beta=beta,
        M=M,
        h0=float(h.min()),
        description=desc,
    )


def geometric_condition(material, R, n):
    """R < alpha / (n M); vacuous when the coefficients are constant."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if material.M == 0.0:
        return True
    return R < material.alpha / (n * material.M)
