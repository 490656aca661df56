"""Two-component box domains, observer-dependent boundary partition, control regions.

The outer domain and the inclusion are axis-aligned boxes on a uniform node grid.
Nodes on the inclusion boundary carry two values (one per component), so the
geometry keeps separate closure masks for the two components.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateDomain,
    EmptyControlRegion,
    MisalignedInterface,
    ObserverOutsideInner,
)

_ALIGN_TOL = 1e-9


class NodeLabel(IntEnum):
    OMEGA1 = 0
    OMEGA2 = 1
    EXTERIOR_BOUNDARY = 2
    INTERFACE_GAMMA = 3


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    @classmethod
    def coerce(cls, spec, dim):
        """Accept ``(a, b)`` in 1D, or per-axis intervals ``((a0, b0), (a1, b1))``."""
        if isinstance(spec, Box):
            box = spec
        else:
            arr = np.asarray(spec, dtype=float)
            if arr.shape == (2,) and dim == 1:
                arr = arr.reshape(1, 2)
            if arr.shape != (dim, 2):
                raise DegenerateDomain(f"box {spec!r} is not {dim} (lo, hi) intervals")
            box = cls(tuple(arr[:, 0]), tuple(arr[:, 1]))
        if len(box.lo) != dim or any(h <= l for l, h in zip(box.lo, box.hi)):
            raise DegenerateDomain(f"box {box} has no interior")
        return box

    @property
    def corners(self):
        grids = np.meshgrid(*[(l, h) for l, h in zip(self.lo, self.hi)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def contains_open(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > np.asarray(self.lo)) and np.all(x < np.asarray(self.hi)))

    def as_list(self):
        return [[float(l), float(h)] for l, h in zip(self.lo, self.hi)]


@dataclass(frozen=True)
class Facets:
    """Flat facet table. In 1D a facet is a single node with unit measure.

    ``normal`` is the unit normal pointing out of component 1 (for the interface,
    that is into the inclusion). ``nodes`` holds the flat node indices of the
    facet endpoints, shape (F, 2) in 2D and (F, 1) in 1D. ``face`` groups facets
    lying on the same box face; ``axis``/``sign`` describe the normal.
    """

    centroid: np.ndarray
    normal: np.ndarray
    measure: np.ndarray
    nodes: np.ndarray
    face: np.ndarray
    axis: np.ndarray
    sign: np.ndarray

    def __len__(self):
        return len(self.measure)

    def records(self):
        Rec = NamedTuple("FacetRecord", [("position", tuple), ("normal", tuple), ("measure", float)])
        return [
            Rec(tuple(c), tuple(n), float(m))
            for c, n, m in zip(self.centroid, self.normal, self.measure)
        ]


@dataclass(frozen=True)
class TwoComponentDomain:
    dim: int
    outer_box: Box
    inner_box: Box
    resolution: int
    cell_size: np.ndarray
    axes: tuple
    node_partition: np.ndarray
    interface_facets: Facets
    boundary_facets: Facets
    inner_index: tuple = field(repr=False)

    @property
    def shape(self):
        return self.node_partition.shape

    @property
    def h(self):
        """Largest cell edge."""
        return float(np.max(self.cell_size))

    @property
    def cell_volume(self):
        return float(np.prod(self.cell_size))

    @property
    def points(self):
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @property
    def comp2_mask(self):
        """Closed inclusion: Omega2 nodes plus the side-2 copies of Gamma nodes."""
        p = self.node_partition
        return (p == NodeLabel.OMEGA2) | (p == NodeLabel.INTERFACE_GAMMA)

    @property
    def comp1_mask(self):
        """Closure of Omega1: everything except the open inclusion."""
        return self.node_partition != NodeLabel.OMEGA2

    @property
    def boundary_mask(self):
        return self.node_partition == NodeLabel.EXTERIOR_BOUNDARY

    @property
    def gamma_mask(self):
        return self.node_partition == NodeLabel.INTERFACE_GAMMA

    def summary(self, partition=None):
        """Plain-text report of node counts, facet measures and partition sizes."""
        p = self.node_partition
        lines = [
            f"dim: {self.dim}",
            f"outer_box: {self.outer_box.as_list()}",
            f"inner_box: {self.inner_box.as_list()}",
            f"resolution: {self.resolution}",
            f"cell_size: {[float(c) for c in self.cell_size]}",
            f"nodes_total: {p.size}",
        ]
        for label in NodeLabel:
            lines.append(f"nodes_{label.name.lower()}: {int(np.sum(p == label))}")
        lines.append(f"interface_facets: {len(self.interface_facets)}")
        lines.append(f"interface_measure: {float(self.interface_facets.measure.sum()):.17g}")
        lines.append(f"boundary_facets: {len(self.boundary_facets)}")
        lines.append(f"boundary_measure: {float(self.boundary_facets.measure.sum()):.17g}")
        if partition is not None:
            lines.append(f"observer: {[float(v) for v in partition.observer]}")
            lines.append(f"active_facets: {len(partition.active)}")
            lines.append(f"inactive_facets: {len(partition.inactive)}")
        return "\n".join(lines) + "\n"


def _grid_index(value, lo, step, n):
    k = (value - lo) / step
    kr = int(round(k))
    if abs(k - kr) > _ALIGN_TOL * max(1.0, abs(k)) or not 0 <= kr <= n:
        raise MisalignedInterface(
            f"inner face {value} is not a grid coordinate (offset {k:.6g} cells)"
        )
    return kr


def _box_faces(lo_idx, hi_idx, axes, shape, outward_of_box):
    """Facets on the faces of the index box [lo_idx, hi_idx].

    ``outward_of_box`` selects the orientation: +1 gives normals pointing out of
    the box, -1 into it.
    """
    dim = len(shape)
    cent, norm, meas, nodes, face, ax, sg = [], [], [], [], [], [], []
    face_id = 0
    for k in range(dim):
        for side, idx in ((-1, lo_idx[k]), (+1, hi_idx[k])):
            s = side * outward_of_box
            if dim == 1:
                node = idx
                cent.append([axes[0][node]])
                norm.append([float(s)])
                meas.append(1.0)
                nodes.append([node])
            else:
                other = 1 - k
                for j in range(lo_idx[other], hi_idx[other]):
                    a = [0, 0]
                    b = [0, 0]
                    a[k] = b[k] = idx
                    a[other], b[other] = j, j + 1
                    pa = np.array([axes[0][a[0]], axes[1][a[1]]])
                    pb = np.array([axes[0][b[0]], axes[1][b[1]]])
                    n = [0.0, 0.0]
                    n[k] = float(s)
                    cent.append(0.5 * (pa + pb))
                    norm.append(n)
                    meas.append(float(np.linalg.norm(pb - pa)))
                    nodes.append(
                        [np.ravel_multi_index(tuple(a), shape), np.ravel_multi_index(tuple(b), shape)]
                    )
            count = 1 if dim == 1 else hi_idx[1 - k] - lo_idx[1 - k]
            face.extend([face_id] * count)
            ax.extend([k] * count)
            sg.extend([s] * count)
            face_id += 1
    return Facets(
        centroid=np.asarray(cent, dtype=float),
        normal=np.asarray(norm, dtype=float),
        measure=np.asarray(meas, dtype=float),
        nodes=np.asarray(nodes, dtype=int),
        face=np.asarray(face, dtype=int),
        axis=np.asarray(ax, dtype=int),
        sign=np.asarray(sg, dtype=int),
    )


def build_domain(dim, outer, inner, resolution):
    """Uniform grid with ``resolution`` cells per axis whose lines pass through the inner faces."""
    if dim not in (1, 2):
        raise DegenerateDomain(f"dim must be 1 or 2, got {dim}")
    if resolution < 1:
        raise DegenerateDomain(f"resolution must be positive, got {resolution}")
    outer = Box.coerce(outer, dim)
    inner = Box.coerce(inner, dim)
    lo, hi = np.asarray(outer.lo), np.asarray(outer.hi)
    cell = (hi - lo) / resolution
    axes = tuple(lo[k] + cell[k] * np.arange(resolution + 1) for k in range(dim))
    shape = (resolution + 1,) * dim

    # alignment first: a misplaced interface is the more specific diagnosis
    ilo = tuple(_grid_index(inner.lo[k], lo[k], cell[k], resolution) for k in range(dim))
    ihi = tuple(_grid_index(inner.hi[k], lo[k], cell[k], resolution) for k in range(dim))
    if resolution < 8:
        raise DegenerateDomain(f"resolution must be at least 8, got {resolution}")
    for k in range(dim):
        # two cells on each side keep one-sided second-order stencils inside a component
        if ilo[k] < 2 or ihi[k] > resolution - 2 or ihi[k] - ilo[k] < 2:
            raise DegenerateDomain(
                f"inner box must sit at least two cells inside the outer box and span two cells "
                f"(axis {k}: inner indices {ilo[k]}..{ihi[k]} of {resolution})"
            )

    part = np.full(shape, NodeLabel.OMEGA1, dtype=np.int8)
    idx = np.indices(shape)
    in_closed = np.ones(shape, dtype=bool)
    in_open = np.ones(shape, dtype=bool)
    on_outer = np.zeros(shape, dtype=bool)
    for k in range(dim):
        in_closed &= (idx[k] >= ilo[k]) & (idx[k] <= ihi[k])
        in_open &= (idx[k] > ilo[k]) & (idx[k] < ihi[k])
        on_outer |= (idx[k] == 0) | (idx[k] == resolution)
    part[in_open] = NodeLabel.OMEGA2
    part[in_closed & ~in_open] = NodeLabel.INTERFACE_GAMMA
    part[on_outer] = NodeLabel.EXTERIOR_BOUNDARY

    interface = _box_faces(ilo, ihi, axes, shape, outward_of_box=-1)
    boundary = _box_faces((0,) * dim, (resolution,) * dim, axes, shape, outward_of_box=+1)
    return TwoComponentDomain(
        dim=dim,
        outer_box=outer,
        inner_box=inner,
        resolution=resolution,
        cell_size=cell,
        axes=axes,
        node_partition=part,
        interface_facets=interface,
        boundary_facets=boundary,
        inner_index=(ilo, ihi),
    )


@dataclass(frozen=True)
class BoundaryPartition:
    observer: np.ndarray
    active: np.ndarray
    inactive: np.ndarray
    mn: np.ndarray


def multiplier_field_dot(points, normals, x0):
    """(x - x0) . n for each row."""
    return np.einsum("ij,ij->i", np.asarray(points, float) - np.asarray(x0, float), normals)


def partition_boundary(domain, x0):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    bf = domain.boundary_facets
    mn = multiplier_field_dot(bf.centroid, bf.normal, x0)
    active = np.flatnonzero(mn > 0.0)
    inactive = np.flatnonzero(~(mn > 0.0))
    return BoundaryPartition(observer=x0, active=active, inactive=inactive, mn=mn)


def radii(domain, x0):
    """Largest distances from ``x0`` to the closures of Omega1, Omega2 and Omega.

    The farthest point of a box is one of its corners, and the outer corners
    belong to the closure of Omega1.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    r1 = float(np.max(np.linalg.norm(domain.outer_box.corners - x0, axis=1)))
    r2 = float(np.max(np.linalg.norm(domain.inner_box.corners - x0, axis=1)))
    return r1, r2, max(r1, r2)


def check_star_shaped(domain, x0):
    """Facet test (x - x0).n1 <= 0 on Gamma for an observer inside the inclusion.

    The test function is affine along a facet, so checking the facet endpoints
    is exact.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not domain.inner_box.contains_open(x0):
        raise ObserverOutsideInner(f"observer {x0.tolist()} is not inside the inclusion")
    f = domain.interface_facets
    pts = domain.points
    ok = True
    for col in range(f.nodes.shape[1]):
        mn = multiplier_field_dot(pts[f.nodes[:, col]], f.normal, x0)
        ok &= bool(np.all(mn <= 1e-14))
    return ok


def _distance_to_faces(points, facets, face_ids):
    """Distance from each point to the union of the listed box faces."""
    if len(face_ids) == 0:
        return np.full(len(points), np.inf)
    best = np.full(len(points), np.inf)
    dim = points.shape[1]
    for fid in face_ids:
        sel = facets.face == fid
        if dim == 1:
            d = np.abs(points[:, 0] - facets.centroid[sel][0, 0])
        else:
            k = int(facets.axis[sel][0])
            other = 1 - k
            c = facets.centroid[sel]
            half = 0.5 * facets.measure[sel]
            plane = c[0, k]
            lo = float(np.min(c[:, other] - half))
            hi = float(np.max(c[:, other] + half))
            along = np.clip(points[:, other], lo, hi)
            d = np.hypot(points[:, k] - plane, points[:, other] - along)
        best = np.minimum(best, d)
    return best


@dataclass(frozen=True)
class ControlRegions:
    omega1: np.ndarray
    omega2: np.ndarray
    thickness1: float
    thickness2: float
    dist1: np.ndarray = field(repr=False)
    dist2: np.ndarray = field(repr=False)

    def inner_regions(self, fraction=0.5):
        """Masks of the shrunken regions (same centres, ``fraction`` of the thickness)."""
        return (
            self.omega1 & (self.dist1 <= fraction * self.thickness1 + 1e-12),
            self.omega2 & (self.dist2 <= fraction * self.thickness2 + 1e-12),
        )

    def without_omega2(self):
        return replace(self, omega2=np.zeros_like(self.omega2), thickness2=0.0)

    def without_omega1(self):
        return replace(self, omega1=np.zeros_like(self.omega1), thickness1=0.0)


def build_control_regions(domain, partition, thickness1, thickness2):
    """omega1 = Omega1 nodes near the active boundary; omega2 = Omega2 nodes near Gamma."""
    h = domain.h
    for name, t in (("thickness1", thickness1), ("thickness2", thickness2)):
        if t < 2.0 * h - 1e-12:
            raise EmptyControlRegion(
                f"{name}={t:.6g} is below two cell sizes ({2 * h:.6g}); region would not be grid-resolved"
            )
    pts = domain.points
    shape = domain.shape
    bf = domain.boundary_facets
    active_faces = np.unique(bf.face[partition.active])
    d1 = _distance_to_faces(pts, bf, active_faces).reshape(shape)
    gf = domain.interface_facets
    d2 = _distance_to_faces(pts, gf, np.unique(gf.face)).reshape(shape)

    omega1 = domain.comp1_mask & (d1 <= thickness1 + 1e-12)
    omega2 = domain.comp2_mask & (d2 <= thickness2 + 1e-12)
    if len(partition.active) > 0 and not omega1.any():
        raise EmptyControlRegion("omega1 is empty")
    if not omega2.any():
        raise EmptyControlRegion("omega2 is empty")
    return ControlRegions(omega1, omega2, float(thickness1), float(thickness2), d1, d2)
