import dataclasses

import numpy as np
import pytest

from cartan_lab.services.config_service import build_run_config
from cartan_lab.services.expression_service import EvalEnv, evaluate, parse, squared
from cartan_lab.services.sampling_service import rejection_reason, sample_points
from cartan_lab.services.cartan_service import CotangentPoint
from cartan_lab.utils.errors import ConfigError, SamplingExhausted


def test_sampling_is_deterministic(app):
    with app.app_context():
        config = build_run_config({'preset': 'hyperbolic-half-plane', 'points': 20, 'seed': 42}, app.config)
        assert sample_points(config) == sample_points(config)
        other = dataclasses.replace(config, seed=43)
        assert sample_points(other) != sample_points(config)


def test_points_respect_box_and_annulus(app):
    with app.app_context():
        config = build_run_config(
            {'preset': 'hyperbolic-half-plane', 'points': 50, 'p_annulus': '0.5:2'}, app.config)
        for point in sample_points(config):
            assert -1.0 <= point.x[0] <= 1.0
            assert 0.5 <= point.x[1] <= 2.0
            assert 0.5 <= np.linalg.norm(point.p) <= 2.0


def test_sphere_samples_stay_inside_tube(app):
    with app.app_context():
        config = build_run_config({'preset': 'sphere-patch', 'points': 50}, app.config)
        k2_ast = squared(parse(config.k_expr, 2))
        for point in sample_points(config):
            k2 = float(evaluate(k2_ast, EvalEnv(point.x, point.p)))
            assert k2 < 1.0
            assert k2 < (1.0 - config.tube_margin)


def test_sampling_exhausted(app):
    with app.app_context():
        config = build_run_config({'preset': 'euclidean', 'c': 1.0, 'p_annulus': '5:6'}, app.config)
        config = dataclasses.replace(config, max_rejections=50)
        with pytest.raises(SamplingExhausted) as excinfo:
            sample_points(config)
        assert excinfo.value.rejections == 51


def test_rejection_reasons(app):
    config = build_run_config({'preset': 'euclidean', 'c': 1.0}, app.config)
    k2_ast = squared(parse(config.k_expr, 2))
    params = config.lift_params()
    assert rejection_reason(k2_ast, CotangentPoint((0.0, 0.0), (0.5, 0.0)), config, params) is None
    assert rejection_reason(k2_ast, CotangentPoint((0.0, 0.0), (0.99, 0.0)), config, params) == 'outside the tube'
    assert rejection_reason(k2_ast, CotangentPoint((0.0, 0.0), (2.0, 0.0)), config, params) == 'alpha + 2 tau v <= 0'

    log_ast = squared(parse('sqrt(log(x1)*(p1^2+p2^2))', 2))
    assert rejection_reason(log_ast, CotangentPoint((-1.0, 0.0), (1.0, 0.0)), config, params).startswith('evaluation')


def test_dimension_mismatch(app):
    with app.app_context():
        config = build_run_config({'preset': 'euclidean'}, app.config)
        with pytest.raises(ConfigError):
            sample_points(config, parse('sqrt(p1^2+p2^2+p3^2)', 3))
