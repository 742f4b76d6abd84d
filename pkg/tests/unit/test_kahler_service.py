import math
from types import SimpleNamespace

import numpy as np
import pytest

from cartan_lab.services.cartan_service import CotangentPoint, build_context, build_fields, max_abs
from cartan_lab.services.expression_service import parse
from cartan_lab.services.kahler_service import (
    FrameVector, LiftParams, apply_J, build_lift, canonical_pairing, constant_curvature_residual,
    coordinate_metric, fundamental_form, inner, kahler_residuals, lifted_metric, linked_components,
    nijenhuis, obstruction_tensors, tube_predicate,
)
from cartan_lab.services.preset_service import PRESETS
from cartan_lab.utils.errors import ConfigError, NotApplicable, NotPositiveDefinite

EUCLIDEAN = parse(PRESETS['euclidean'].k_expr, 2)
HALF_PLANE = parse(PRESETS['hyperbolic-half-plane'].k_expr, 2)
RANDERS = parse(PRESETS['randers'].k_expr, 2)

HALF_PLANE_POINTS = (
    CotangentPoint((0.3, 1.5), (0.7, -0.4)),
    CotangentPoint((-0.6, 0.8), (-1.1, 0.9)),
)


def _random_vectors(count, n, seed=7):
    rng = np.random.default_rng(seed)
    return [FrameVector.from_array(rng.standard_normal(2 * n)) for _ in range(count)]


def test_lift_params_validation():
    with pytest.raises(ConfigError):
        LiftParams(alpha=0.0)
    with pytest.raises(ConfigError):
        LiftParams(beta=-1.0)
    with pytest.raises(ConfigError):
        LiftParams(v=1.0, c=1.0, linked=True)


def test_linked_params():
    params = LiftParams.linked_to(-1.0)
    assert params.v == 1.0
    assert params.tau_bound() == math.inf
    params = LiftParams.linked_to(1.0)
    assert params.v == -1.0
    assert params.tau_bound() == pytest.approx(0.5)
    assert params.admissible(0.4)
    assert not params.admissible(0.5)


def test_linked_params_without_curvature_have_positive_zero_weight():
    params = LiftParams.linked_to(0.0, alpha=2.0, beta=3.0)
    assert params.v == 0.0
    assert math.copysign(1.0, params.v) == 1.0
    assert params.as_dict()['v'] == 0.0
    assert '-0.0' not in repr(params.as_dict())


def test_euclidean_flat_lift():
    ctx = build_context(EUCLIDEAN, CotangentPoint((0.0, 0.0), (1.0, 0.0)))
    metric = lifted_metric(ctx, LiftParams())
    np.testing.assert_allclose(metric.GL, np.eye(2))
    np.testing.assert_allclose(metric.GU, np.eye(2))
    np.testing.assert_allclose(coordinate_metric(ctx, metric), np.eye(4))


def test_lifted_metric_closed_forms():
    ctx = build_context(EUCLIDEAN, CotangentPoint((0.0, 0.0), (1.0, 0.0)))
    metric = lifted_metric(ctx, LiftParams(v=1.0))
    assert metric.GL[0, 0] == pytest.approx(2.0)
    assert metric.GU[0, 0] == pytest.approx(0.5)
    np.testing.assert_allclose(metric.GL @ metric.GU, np.eye(2), atol=1e-12)


def test_not_positive_definite_outside_tube():
    ctx = build_context(EUCLIDEAN, CotangentPoint((0.0, 0.0), (math.sqrt(2.0), 0.0)))
    with pytest.raises(NotPositiveDefinite) as excinfo:
        lifted_metric(ctx, LiftParams.linked_to(1.0))
    assert excinfo.value.bound == pytest.approx(0.5)


def test_tube_predicate():
    assert tube_predicate(SimpleNamespace(K2=0.5), LiftParams.linked_to(1.0))
    assert not tube_predicate(SimpleNamespace(K2=2.0), LiftParams.linked_to(1.0))
    assert tube_predicate(SimpleNamespace(K2=0.9), LiftParams.linked_to(4.0, beta=0.5))
    with pytest.raises(NotApplicable):
        tube_predicate(SimpleNamespace(K2=0.5), LiftParams.linked_to(-1.0))


def test_apply_j_on_flat_frame():
    ctx = build_context(EUCLIDEAN, CotangentPoint((0.0, 0.0), (1.0, 0.0)))
    metric = lifted_metric(ctx, LiftParams())
    delta_1 = FrameVector(np.array([1.0, 0.0]), np.zeros(2))
    dv_1 = FrameVector(np.zeros(2), np.array([1.0, 0.0]))
    np.testing.assert_allclose(apply_J(metric, delta_1).as_array(), dv_1.as_array())
    np.testing.assert_allclose(apply_J(metric, dv_1).as_array(), -delta_1.as_array())


def test_almost_hermitian_structure():
    ctx = build_context(RANDERS, CotangentPoint((0.2, -0.3), (0.8, 0.5)))
    metric = lifted_metric(ctx, LiftParams(v=0.7))
    vectors = _random_vectors(10, 2)
    for X, Y in zip(vectors, vectors[1:] + vectors[:1]):
        np.testing.assert_allclose(apply_J(metric, apply_J(metric, X)).as_array(), -X.as_array(), atol=1e-12)
        assert inner(metric, apply_J(metric, X), apply_J(metric, Y)) == pytest.approx(inner(metric, X, Y), abs=1e-12)
        assert fundamental_form(metric, X, Y) == pytest.approx(-fundamental_form(metric, Y, X), abs=1e-12)


def test_fundamental_form_is_canonical():
    ctx = build_context(HALF_PLANE, HALF_PLANE_POINTS[0])
    metric = lifted_metric(ctx, LiftParams.linked_to(-1.0))
    delta = [FrameVector(row, np.zeros(2)) for row in np.eye(2)]
    dv = [FrameVector(np.zeros(2), row) for row in np.eye(2)]
    assert fundamental_form(metric, dv[0], delta[0]) == pytest.approx(1.0)
    assert fundamental_form(metric, dv[0], delta[1]) == pytest.approx(0.0, abs=1e-12)
    assert fundamental_form(metric, delta[0], delta[1]) == pytest.approx(0.0, abs=1e-12)
    theta = metric.frame_matrix() @ metric.j_matrix()
    np.testing.assert_allclose(theta, canonical_pairing(2), atol=1e-12)


def test_linked_components_agree():
    ctx = build_context(HALF_PLANE, HALF_PLANE_POINTS[1])
    params = LiftParams.linked_to(-1.0, alpha=1.0, beta=0.8)
    general, linked = lifted_metric(ctx, params), linked_components(ctx, params)
    np.testing.assert_allclose(linked.GL, general.GL, atol=1e-12)
    np.testing.assert_allclose(linked.GU, general.GU, atol=1e-12)


def test_constant_curvature_residual():
    for point in HALF_PLANE_POINTS:
        ctx = build_context(HALF_PLANE, point)
        residual, contracted = constant_curvature_residual(ctx, -1.0)
        assert max_abs(residual) <= 1e-8
        assert max_abs(contracted) <= 1e-8
        wrong, _ = constant_curvature_residual(ctx, 1.0)
        assert max_abs(wrong) > 0.1

    flat = build_context(EUCLIDEAN, HALF_PLANE_POINTS[0])
    assert max_abs(constant_curvature_residual(flat, 0.0)[0]) == 0.0


def test_obstructions():
    flat = build_lift(build_fields(EUCLIDEAN, HALF_PLANE_POINTS[0]), LiftParams())
    A, B_direct, B_closed = obstruction_tensors(flat)
    assert max_abs(A) == 0.0

    randers = build_lift(build_fields(RANDERS, CotangentPoint((0.1, 0.2), (0.9, -0.6))), LiftParams(v=0.7))
    A, B_direct, B_closed = obstruction_tensors(randers)
    assert max_abs(B_direct - B_closed) <= 1e-8
    assert max_abs(A) <= 1e-8

    for point in HALF_PLANE_POINTS:
        A, _, _ = obstruction_tensors(build_lift(build_fields(HALF_PLANE, point), LiftParams.linked_to(-1.0)))
        assert max_abs(A) <= 1e-8


def test_nijenhuis_vanishes_for_linked_half_plane():
    for point in HALF_PLANE_POINTS:
        lift = build_lift(build_fields(HALF_PLANE, point), LiftParams.linked_to(-1.0))
        assert max_abs(nijenhuis(lift)) <= 1e-7


def test_nijenhuis_detects_wrong_weight():
    worst = max(
        max_abs(nijenhuis(build_lift(build_fields(HALF_PLANE, point), LiftParams(v=0.0, c=-1.0))))
        for point in HALF_PLANE_POINTS
    )
    assert worst > 1e-3


def test_nijenhuis_on_frame_vectors():
    lift = build_lift(build_fields(EUCLIDEAN, HALF_PLANE_POINTS[0]), LiftParams())
    X, Y = _random_vectors(2, 2, seed=3)
    assert max_abs(nijenhuis(lift, X, Y).as_array()) <= 1e-10


def test_kahler_residuals_keys():
    lift = build_lift(build_fields(HALF_PLANE, HALF_PLANE_POINTS[0]), LiftParams.linked_to(-1.0))
    residuals = kahler_residuals(lift)
    assert 'linked_components' in residuals
    assert 'tube' not in residuals
    for name in ('hermitian', 'complex_structure', 'symplectic_form', 'form_antisymmetry', 'metric_inverse'):
        assert residuals[name] <= 1e-12, name
    assert residuals['inverse_closed_form'] <= 1e-10
