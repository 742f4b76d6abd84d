import numpy as np
import pytest

from cartan_lab.services.cartan_service import CotangentPoint, build_fields, max_abs
from cartan_lab.services.curvature_service import (
    CONNECTION_ORDER, CURVATURE_ORDER, SYMMETRY_ORDER, ConnectionBlocks, build_connection,
    connection_closed_form, connection_koszul, connection_residuals, curvature, curvature_residuals,
    einstein_residuals, nabla_curvature, ricci, riemannian_closed_forms, symmetry_residuals,
)
from cartan_lab.services.expression_service import parse
from cartan_lab.services.kahler_service import FrameVector, LiftParams, build_lift
from cartan_lab.services.preset_service import PRESETS
from cartan_lab.utils.errors import NotRiemannian

EUCLIDEAN = parse(PRESETS['euclidean'].k_expr, 2)
HALF_PLANE = parse(PRESETS['hyperbolic-half-plane'].k_expr, 2)
SPHERE = parse(PRESETS['sphere-patch'].k_expr, 2)
RANDERS = parse(PRESETS['randers'].k_expr, 2)

HALF_PLANE_POINT = CotangentPoint((0.3, 1.5), (0.7, -0.4))
SPHERE_POINT = CotangentPoint((1.2, 0.3), (0.3, 0.2))
RANDERS_POINT = CotangentPoint((0.1, -0.2), (0.9, 0.6))


def _connection(k_ast, point, params, order=CURVATURE_ORDER):
    return build_connection(build_lift(build_fields(k_ast, point, order), params))


def test_connection_blocks_layout():
    n = 2
    rng = np.random.default_rng(0)
    blocks = {(a, b): (rng.standard_normal((n, n, n)), rng.standard_normal((n, n, n)))
              for a in 'hv' for b in 'hv'}
    assembled = ConnectionBlocks.from_blocks(blocks)
    horizontal, vertical = assembled.block('v', 'h')
    np.testing.assert_array_equal(horizontal, blocks[('v', 'h')][0])
    np.testing.assert_array_equal(vertical, blocks[('v', 'h')][1])
    assert assembled.n == 2


def test_flat_lift_is_flat():
    connection = _connection(EUCLIDEAN, HALF_PLANE_POINT, LiftParams(), order=SYMMETRY_ORDER)
    assert max_abs(connection.Gamma.value) <= 1e-12
    assert max_abs(curvature(connection).tensor) <= 1e-9
    assert max_abs(nabla_curvature(connection)) <= 1e-8
    assert einstein_residuals(connection)['einstein_residual'] <= 1e-8


def test_half_plane_connection():
    connection = _connection(HALF_PLANE, HALF_PLANE_POINT, LiftParams.linked_to(-1.0), order=CONNECTION_ORDER)
    residuals = connection_residuals(connection)
    assert residuals['torsion'] <= 1e-9
    assert residuals['metricity'] <= 1e-9
    assert residuals['closed_form'] <= 1e-8


def test_half_plane_horizontal_block():
    lift = build_lift(build_fields(HALF_PLANE, HALF_PLANE_POINT, CONNECTION_ORDER), LiftParams.linked_to(-1.0))
    horizontal, vertical = connection_koszul(build_connection(lift)).block('h', 'h')
    ctx = lift.base.context()
    GL = lift.metric().GL
    np.testing.assert_allclose(horizontal, ctx.H.transpose(1, 2, 0), atol=1e-9)
    np.testing.assert_allclose(vertical, -np.einsum('hj,i->ijh', GL, ctx.p), atol=1e-9)


def test_randers_closed_form_connection():
    lift = build_lift(build_fields(RANDERS, RANDERS_POINT, CONNECTION_ORDER), LiftParams.linked_to(0.0))
    koszul = connection_koszul(build_connection(lift)).frame
    np.testing.assert_allclose(connection_closed_form(lift).frame, koszul, atol=1e-8)


@pytest.mark.parametrize('k_ast, point, c', [
    (HALF_PLANE, HALF_PLANE_POINT, -1.0),
    (SPHERE, SPHERE_POINT, 1.0),
])
def test_constant_curvature_reduction(k_ast, point, c):
    connection = _connection(k_ast, point, LiftParams.linked_to(c))
    residuals = curvature_residuals(connection, riemannian=True)
    assert residuals['antisymmetry'] <= 1e-9
    assert residuals['bianchi'] <= 1e-8
    assert residuals['riemannian_closed_form'] <= 1e-7

    einstein = einstein_residuals(connection)
    assert einstein['ricci_symmetry'] <= 1e-9
    assert einstein['einstein_residual'] <= 1e-6
    assert einstein['mixed_ricci'] <= 1e-8
    assert einstein['mean_torsion'] <= 1e-9


def test_ricci_is_einstein_multiple():
    connection = _connection(HALF_PLANE, HALF_PLANE_POINT, LiftParams.linked_to(-1.0))
    Gf = connection.lift.metric().frame_matrix()
    ric = ricci(curvature(connection), Gf)
    np.testing.assert_allclose(ric.matrix, -2.0 * Gf, atol=1e-6)
    upper, lower = ric.mixed()
    assert upper.shape == (2, 2)
    assert lower.shape == (2, 2)


def test_curvature_on_frame_vectors():
    connection = _connection(HALF_PLANE, HALF_PLANE_POINT, LiftParams.linked_to(-1.0))
    blocks = curvature(connection)
    GL = connection.lift.metric().GL
    delta = [FrameVector(row, np.zeros(2)) for row in np.eye(2)]
    # K(delta_1, delta_2) delta_1 = c beta (G_12 delta_1 - G_11 delta_2) with c beta = -1
    horizontal, vertical = blocks.apply(delta[0], delta[1], delta[0])
    np.testing.assert_allclose(horizontal, -np.array([GL[0, 1], -GL[0, 0]]), atol=1e-7)
    np.testing.assert_allclose(vertical, 0.0, atol=1e-7)
    assert blocks.family('h', 'h', 'h').shape == (2, 2, 2, 4)


@pytest.mark.parametrize('k_ast, point, c', [
    (HALF_PLANE, HALF_PLANE_POINT, -1.0),
    (SPHERE, SPHERE_POINT, 1.0),
])
def test_locally_symmetric(k_ast, point, c):
    connection = _connection(k_ast, point, LiftParams.linked_to(c), order=SYMMETRY_ORDER)
    residuals = symmetry_residuals(connection)
    assert residuals['nabla_curvature'] <= 1e-5
    assert residuals['contracted_identity'] <= 1e-5


def test_randers_is_not_einstein():
    connection = _connection(RANDERS, RANDERS_POINT, LiftParams.linked_to(-1.0), order=SYMMETRY_ORDER)
    with pytest.raises(NotRiemannian):
        riemannian_closed_forms(connection.lift.base.context(), connection.lift.metric(), connection.lift.params)
    einstein = einstein_residuals(connection)
    assert einstein['einstein_residual'] > 1e-3
    assert einstein['mean_torsion'] > 1e-3
    assert symmetry_residuals(connection)['nabla_curvature'] > 1e-3
