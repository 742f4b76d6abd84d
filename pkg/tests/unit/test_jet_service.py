from types import SimpleNamespace

import numpy as np
import pytest

from cartan_lab.services.cartan_service import CotangentPoint
from cartan_lab.services.expression_service import EvalEnv, evaluate, parse
from cartan_lab.services.jet_service import JetConfig, expand, partial, seed
from cartan_lab.utils.errors import ConfigError, DomainError
from cartan_lab.utils.jets import Jet

# Smooth expressions in n = 2 used against finite differences
EXPRESSIONS = (
    'sqrt(p1^2+p2^2)',
    'sqrt(x2^2*(p1^2+p2^2))',
    'sqrt(p1^2+p2^2/sin(x1)^2)',
    'sqrt(p1^2+p2^2)+0.3*p1',
    'exp(x1)*p1^2+p2^2',
    'log(2+x1*x2)*p1*p2+p2^2',
    'pow(p1^2+2*p2^2, 0.5)*cos(x2)',
    '(p1+x1*p2)/(1+x2^2)',
    'sin(x1+p1)*p2^3',
    'p1^4/(p1^2+p2^2)+x1*x2*p2^2',
    'sqrt(exp(x1)*p1^2+exp(-x2)*p2^2)',
    'cos(x1*x2)*p1^2+sin(x2)*p1*p2+3*p2^2',
    'sqrt((1+x1^2)*p1^2+(1+x2^2)*p2^2)+0.1*x1*p2',
    'log(1+p1^2+p2^2)*exp(-x1*x2)',
    'pow(x2, 3)*p1/(p2^2+1)',
    '-p1*p2+x1^3*p2^2-x2/(1+p1^2)',
    'exp(sin(x1)*p2)+cos(p1)*x2',
    'sqrt(1+x1^2+x2^2)*(p1^3-p2^3)',
    'pow(p1^2+p2^2, 1.5)/(2+cos(x1))',
    '(x1-x2)^2*sqrt(p1^2+x1^2*p2^2)',
)

# One expression per primitive of the language
PRIMITIVES = (
    'x1+p2',
    'x2-p1',
    'x1*p1',
    'p2/x2',
    '-p1',
    'x2^3',
    'x2^(-2)',
    'sqrt(x2)',
    'exp(p1)',
    'log(x1)',
    'sin(x2)',
    'cos(p2)',
    'pow(x2, 2.5)',
    'pow(x2, p1)',
)

POINT = CotangentPoint((0.7, 1.3), (0.6, -0.9))


def _shifted(point, direction, step):
    values = list(point.x) + list(point.p)
    values[direction] += step
    n = point.n
    return CotangentPoint(tuple(values[:n]), tuple(values[n:]))


def _value(ast, point):
    return float(evaluate(ast, EvalEnv(point.x, point.p)))


def _central_first(ast, point, a, h=1e-5):
    return (_value(ast, _shifted(point, a, h)) - _value(ast, _shifted(point, a, -h))) / (2 * h)


def _central_second(ast, point, a, b, h=1e-4):
    def shifted(sa, sb):
        return _value(ast, _shifted(_shifted(point, a, sa * h), b, sb * h))
    return (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4 * h * h)


def test_jet_config_bounds():
    with pytest.raises(ConfigError):
        JetConfig(7, 4)
    with pytest.raises(ConfigError):
        JetConfig(2, 3)
    assert JetConfig(6, 4).order == 6


def test_seed_directions():
    env = seed(POINT, JetConfig(2, 4))
    assert env.x[1].derivative_value([1]) == 1.0
    assert env.p[0].derivative_value([2]) == 1.0
    assert env.p[0].derivative_value([0]) == 0.0


def test_seed_rejects_zero_section():
    with pytest.raises(DomainError):
        seed(SimpleNamespace(x=(1.0, 0.0), p=(0.0, 0.0)), JetConfig(2, 4))


def test_seed_rejects_wrong_dimension():
    with pytest.raises(ConfigError):
        seed(POINT, JetConfig(2, 6))


def test_expand_constant_expression():
    jet = expand(parse('2*3', 2), POINT, 3)
    assert jet.value == 6.0
    assert jet.order == 3
    np.testing.assert_allclose(jet.coeffs[1:], 0.0)


def test_partial_exact():
    ast = parse('x1^2*p1^3', 1)
    point = CotangentPoint((1.5,), (0.7,))
    assert partial(ast, point, [0, 1]) == pytest.approx(2 * 1.5 * 3 * 0.7 ** 2)
    assert partial(ast, point, [1, 1, 1]) == pytest.approx(6 * 1.5 ** 2)
    assert partial(ast, point, []) == pytest.approx(1.5 ** 2 * 0.7 ** 3)


def test_partial_of_callable():
    point = CotangentPoint((2.0,), (3.0,))
    assert partial(lambda env: env.x[0] * env.p[0] * env.p[0], point, [0, 1]) == pytest.approx(6.0)


@pytest.mark.parametrize('source', EXPRESSIONS + PRIMITIVES)
def test_first_partials_match_finite_differences(source):
    ast = parse(source, 2)
    for a in range(4):
        expected = _central_first(ast, POINT, a)
        assert partial(ast, POINT, [a]) == pytest.approx(expected, abs=max(1e-6, 1e-3 * abs(expected)))


@pytest.mark.parametrize('source', EXPRESSIONS + PRIMITIVES)
def test_second_partials_match_finite_differences(source):
    ast = parse(source, 2)
    for a in range(4):
        for b in range(a, 4):
            expected = _central_second(ast, POINT, a, b)
            assert partial(ast, POINT, [a, b]) == pytest.approx(expected, abs=max(1e-5, 1e-3 * abs(expected)))


@pytest.mark.parametrize('source', EXPRESSIONS + PRIMITIVES)
def test_third_partials_match_differenced_second_partials(source):
    ast = parse(source, 2)
    h = 1e-5
    for a in range(4):
        for b in range(4):
            for c in range(b, 4):
                up = partial(ast, _shifted(POINT, a, h), [b, c])
                down = partial(ast, _shifted(POINT, a, -h), [b, c])
                expected = (up - down) / (2 * h)
                assert partial(ast, POINT, [a, b, c]) == pytest.approx(expected, abs=max(1e-5, 1e-3 * abs(expected)))


def _differenced(ast, point, inner, outer, h):
    """Central differences along ``outer`` of the exact partial along ``inner``."""
    if not outer:
        return partial(ast, point, inner)
    up = _differenced(ast, _shifted(point, outer[0], h), inner, outer[1:], h)
    down = _differenced(ast, _shifted(point, outer[0], -h), inner, outer[1:], h)
    return (up - down) / (2 * h)


@pytest.mark.parametrize('source', [
    'sqrt(x2^2*(p1^2+p2^2))',
    'sqrt(p1^2+p2^2/sin(x1)^2)',
    'log(2+x1*x2)*p1*p2+p2^2',
    'exp(sin(x1)*p2)+cos(p1)*x2',
    'pow(p1^2+p2^2, 1.5)/(2+cos(x1))',
])
@pytest.mark.parametrize('directions, h', [
    ((0, 2, 3, 1), 1e-4),
    ((2, 2, 3, 3), 1e-4),
    ((1, 2, 3, 0, 3), 1e-3),
    ((2, 3, 2, 0, 1), 1e-3),
    ((0, 1, 2, 3, 2, 1), 2e-3),
    ((3, 3, 3, 2, 2, 0), 2e-3),
])
def test_high_orders_match_differenced_third_partials(source, directions, h):
    ast = parse(source, 2)
    expected = _differenced(ast, POINT, list(directions[:3]), list(directions[3:]), h)
    assert partial(ast, POINT, list(directions)) == pytest.approx(expected, rel=1e-3, abs=1e-4)


@pytest.mark.parametrize('first, second', [
    (EXPRESSIONS[1], EXPRESSIONS[3]),
    (EXPRESSIONS[5], EXPRESSIONS[12]),
    (EXPRESSIONS[16], PRIMITIVES[13]),
    (EXPRESSIONS[19], EXPRESSIONS[8]),
])
def test_partials_are_linear(first, second):
    f, g = parse(first, 2), parse(second, 2)
    total = parse(f'({first})+({second})', 2)
    for directions in ([0], [3], [1, 2], [0, 0, 3], [2, 3, 3, 1]):
        expected = partial(f, POINT, directions) + partial(g, POINT, directions)
        assert partial(total, POINT, directions) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize('source', EXPRESSIONS[:6] + PRIMITIVES[-4:])
def test_coefficients_do_not_depend_on_seeding_order(source):
    ast = parse(source, 2)
    order, dim = 4, 4
    values = list(POINT.x) + list(POINT.p)
    reverse = [dim - 1 - k for k in range(dim)]

    forward = evaluate(ast, seed(POINT, JetConfig(order, dim))).coefficients()
    jets = [Jet.variable(value, reverse[k], order, dim) for k, value in enumerate(values)]
    backward = evaluate(ast, EvalEnv(tuple(jets[:2]), tuple(jets[2:]))).coefficients()

    assert set(forward) == set(backward)
    for exponent, coefficient in forward.items():
        mirrored = tuple(exponent[reverse[k]] for k in range(dim))
        assert backward[mirrored] == pytest.approx(coefficient, rel=1e-12, abs=1e-14)
