import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavehum.errors import DegenerateDomain, EmptyControlRegion, MisalignedInterface, ObserverOutsideInner
from wavehum.geometry import (
    NodeLabel,
    build_control_regions,
    build_domain,
    check_star_shaped,
    partition_boundary,
    radii,
)

from conftest import INNER1, INNER2, UNIT1, UNIT2

DOM2 = build_domain(2, UNIT2, INNER2, 16)
DOM1 = build_domain(1, UNIT1, INNER1, 8)


def test_1d_interface_sits_on_grid_nodes():
    gamma = DOM1.points[DOM1.gamma_mask.ravel(), 0]
    np.testing.assert_allclose(sorted(gamma), [0.25, 0.75])
    np.testing.assert_allclose(sorted(DOM1.interface_facets.centroid[:, 0]), [0.25, 0.75])


def test_2d_interface_measure_is_inner_perimeter():
    assert DOM2.interface_facets.measure.sum() == pytest.approx(2.0, abs=1e-14)
    assert DOM2.boundary_facets.measure.sum() == pytest.approx(4.0, abs=1e-14)


def test_misaligned_interface():
    with pytest.raises(MisalignedInterface):
        build_domain(1, UNIT1, [0.3, 0.7], 7)


def test_inner_touching_outer_is_degenerate():
    with pytest.raises(DegenerateDomain):
        build_domain(1, UNIT1, [0.0, 0.5], 16)
    with pytest.raises(DegenerateDomain):
        build_domain(2, UNIT2, [[0.25, 1.0], [0.25, 0.75]], 16)


def test_interface_normals_point_into_inclusion():
    f = DOM2.interface_facets
    centre = np.array([0.5, 0.5])
    assert np.all(np.einsum("ij,ij->i", centre - f.centroid, f.normal) > 0)
    assert np.allclose(np.linalg.norm(f.normal, axis=1), 1.0)


def test_node_labels_match_box_membership():
    pts = DOM2.points
    lab = DOM2.node_partition.ravel()
    inside = np.all((pts > 0.25) & (pts < 0.75), axis=1)
    assert np.all(lab[inside] == NodeLabel.OMEGA2)
    on_outer = np.any((pts == 0.0) | (pts == 1.0), axis=1)
    assert np.all(lab[on_outer] == NodeLabel.EXTERIOR_BOUNDARY)


def test_interior_observer_activates_whole_square():
    part = partition_boundary(DOM2, (0.5, 0.5))
    assert len(part.active) == len(DOM2.boundary_facets) and len(part.inactive) == 0


def test_1d_both_endpoints_active():
    part = partition_boundary(DOM1, 0.5)
    assert len(part.active) == 2
    np.testing.assert_allclose(part.mn, [0.5, 0.5])


def test_far_left_observer_deactivates_left_face():
    part = partition_boundary(DOM2, (-10.0, 0.5))
    bf = DOM2.boundary_facets
    left = (bf.axis == 0) & (bf.sign < 0)
    right = (bf.axis == 0) & (bf.sign > 0)
    assert set(np.flatnonzero(left)) <= set(part.inactive)
    assert set(np.flatnonzero(right)) <= set(part.active)
    np.testing.assert_allclose(part.mn[left], -10.0)


def test_radii_examples():
    assert radii(DOM1, 0.5) == pytest.approx((0.5, 0.25, 0.5))
    assert radii(DOM2, (0.5, 0.5))[2] == pytest.approx(math.sqrt(0.5))
    assert radii(DOM2, (0.25, 0.25))[1] == pytest.approx(math.sqrt(0.5))


def test_star_shaped_examples():
    assert check_star_shaped(DOM2, (0.5, 0.5))
    assert check_star_shaped(DOM2, (0.26, 0.26))
    with pytest.raises(ObserverOutsideInner):
        check_star_shaped(DOM2, (0.9, 0.9))


def test_control_region_1d_is_metric_neighbourhood():
    dom = build_domain(1, UNIT1, INNER1, 100)
    reg = build_control_regions(dom, partition_boundary(dom, 0.5), 0.1, 0.1)
    x = dom.axes[0]
    expect = dom.comp1_mask & (np.minimum(x, 1 - x) <= 0.1 + 1e-12)
    np.testing.assert_array_equal(reg.omega1, expect)


def test_control_region_2d_interface_neighbourhood():
    dom = build_domain(2, UNIT2, INNER2, 40)
    reg = build_control_regions(dom, partition_boundary(dom, (0.5, 0.5)), 0.1, 0.1)
    p = dom.points.reshape(dom.shape + (2,))
    d = np.minimum.reduce([p[..., 0] - 0.25, 0.75 - p[..., 0], p[..., 1] - 0.25, 0.75 - p[..., 1]])
    np.testing.assert_array_equal(reg.omega2, dom.comp2_mask & (d <= 0.1 + 1e-12))


def test_control_region_too_thin():
    with pytest.raises(EmptyControlRegion):
        build_control_regions(DOM2, partition_boundary(DOM2, (0.5, 0.5)), 0.5 * DOM2.h, 0.125)


def test_every_interface_facet_touches_omega2():
    reg = build_control_regions(DOM2, partition_boundary(DOM2, (0.5, 0.5)), 0.125, 0.125)
    om2 = reg.omega2.ravel()
    assert np.all(om2[DOM2.interface_facets.nodes].any(axis=1))


def test_summary_report_lists_counts():
    text = DOM2.summary(partition_boundary(DOM2, (0.5, 0.5)))
    assert "interface" in text.lower()


points = st.tuples(st.floats(-3, 3), st.floats(-3, 3))
inner_points = st.tuples(st.floats(0.2501, 0.7499), st.floats(0.2501, 0.7499))


@given(points)
def test_partition_is_exhaustive_and_disjoint(x0):
    part = partition_boundary(DOM2, x0)
    a, b = set(part.active), set(part.inactive)
    assert not a & b
    assert a | b == set(range(len(DOM2.boundary_facets)))


@given(st.floats(0.02, 0.3), st.floats(0.0, 0.2))
@settings(max_examples=30)
def test_omega1_grows_with_thickness(t, extra):
    dom = build_domain(2, UNIT2, INNER2, 32)
    part = partition_boundary(dom, (0.5, 0.5))
    t = max(t, 2 * dom.h)
    small = build_control_regions(dom, part, t, 0.125).omega1
    big = build_control_regions(dom, part, t + extra, 0.125).omega1
    assert np.all(big[small])


@given(inner_points)
def test_inner_observer_star_shaped_and_radii(x0):
    assert check_star_shaped(DOM2, x0)
    x = np.asarray(x0)
    f = DOM2.interface_facets
    ends = DOM2.points[f.nodes]
    mn = np.einsum("fek,fk->fe", ends - x, f.normal)
    assert np.all(mn <= 1e-14)
    r1, r2, r = radii(DOM2, x0)
    assert r == max(r1, r2) == r1 and r1 > r2
