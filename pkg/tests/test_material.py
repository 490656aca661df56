import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavehum.errors import NonPositiveH, NotElliptic, NotSymmetric
from wavehum.geometry import build_domain
from wavehum.material import (
    CoefficientField,
    MaterialData,
    affine,
    checkerboard,
    geometric_condition,
    identity_scaled,
    validate_material,
)

from conftest import INNER2, UNIT2

DOM = build_domain(2, UNIT2, INNER2, 16)


def test_identity_constants():
    m = validate_material(DOM, identity_scaled(1.0), 1.0)
    assert (m.alpha, m.beta, m.M, m.h0) == (1.0, 1.0, 0.0, 1.0)


def test_affine_constants_exact():
    grad = np.zeros((2, 2, 2))
    grad[0, 0, 0] = grad[1, 1, 0] = 0.1
    m = validate_material(DOM, affine(np.eye(2), grad), 1.0)
    assert m.alpha == pytest.approx(1.0, abs=1e-12)
    assert m.beta == pytest.approx(1.1, abs=1e-12)
    assert m.M == pytest.approx(0.1, abs=1e-10)
    # derivative field itself, not just its maximum
    np.testing.assert_allclose(m.dA(1)[DOM.comp1_mask][:, 0, 0, 0], 0.1, atol=1e-10)


def test_negative_eigenvalue_rejected():
    target = np.array([0.5, 0.5])

    def A(points, comp):
        out = np.broadcast_to(np.eye(2), (len(points), 2, 2)).copy()
        hit = np.all(np.isclose(points, target), axis=1)
        out[hit] = np.diag([1.0, -0.5])
        return out

    with pytest.raises(NotElliptic):
        validate_material(DOM, A, 1.0)


def test_asymmetric_rejected():
    with pytest.raises(NotSymmetric):
        validate_material(DOM, lambda p, c: np.broadcast_to([[1.0, 0.2], [0.0, 1.0]], (len(p), 2, 2)), 1.0)


def test_nonpositive_h_rejected():
    with pytest.raises(NonPositiveH):
        validate_material(DOM, identity_scaled(1.0), lambda c: np.where(c[:, 0] < 0.3, 0.0, 1.0))


def test_h_per_facet_and_h0():
    m = validate_material(DOM, identity_scaled(1.0), lambda c: 1.0 + c[:, 1])
    assert m.h.shape == (len(DOM.interface_facets),)
    assert m.h0 == pytest.approx(1.0 + DOM.interface_facets.centroid[:, 1].min())


def test_checkerboard_extremes():
    m = validate_material(DOM, checkerboard(1.0, 3.0), 1.0)
    assert (m.alpha, m.beta, m.M) == (1.0, 3.0, 0.0)


@pytest.mark.parametrize(
    "M,R,expect", [(0.0, 100.0, True), (0.1, 0.5, True), (0.1, 6.0, False)]
)
def test_geometric_condition(M, R, expect):
    base = validate_material(DOM, identity_scaled(1.0), 1.0)
    mat = MaterialData(base.A1, base.A2, base.dA1, base.dA2, base.h, 1.0, 1.0, M, 1.0)
    assert geometric_condition(mat, R, 2) is expect


spd = st.tuples(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(-0.9, 0.9))


@given(spd)
@settings(max_examples=40, deadline=None)
def test_constant_field_matches_closed_form(params):
    a, c, r = params
    b = r * np.sqrt(a * c)
    mat = np.array([[a, b], [b, c]])
    field = CoefficientField("const", {}, lambda p, comp: np.broadcast_to(mat, (len(p), 2, 2)).copy())
    m = validate_material(DOM, field, 1.0)
    ev = np.linalg.eigvalsh(mat)
    assert m.M == 0.0
    assert m.alpha == pytest.approx(ev[0], rel=1e-12)
    assert m.beta == pytest.approx(ev[1], rel=1e-12)


def test_validation_is_deterministic():
    grad = np.zeros((2, 2, 2))
    grad[0, 1, 1] = grad[1, 0, 1] = 0.05
    A = affine(2.0 * np.eye(2), grad)
    m1 = validate_material(DOM, A, 1.0, seed=3)
    m2 = validate_material(DOM, A, 1.0, seed=3)
    assert (m1.alpha, m1.beta, m1.M) == (m2.alpha, m2.beta, m2.M)
    np.testing.assert_array_equal(m1.dA1, m2.dA1)
