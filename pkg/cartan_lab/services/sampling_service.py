"""Sampling service module.

This module draws the cotangent points a run is evaluated at. The draw is
fully determined by the seed.
"""

import numpy as np
from flask import current_app

from cartan_lab.services.cartan_service import CotangentPoint
from cartan_lab.services.expression_service import EvalEnv, evaluate, parse, squared
from cartan_lab.utils.errors import ConfigError, EvaluationError, GeometryError, SamplingExhausted


def _draw(rng, config):
    lows = np.array([lo for lo, _ in config.domain])
    highs = np.array([hi for _, hi in config.domain])
    x = rng.uniform(lows, highs)
    direction = rng.standard_normal(config.n)
    radius = rng.uniform(*config.p_annulus)
    # direction is only zero with probability zero; the norm guard keeps the division finite
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return None
    return CotangentPoint(tuple(float(v) for v in x), tuple(float(v) for v in radius * direction / norm))


def rejection_reason(k2_ast, point, config, params):
    """Why ``point`` is unusable for the run, or None when it is accepted.

    Args:
        k2_ast (ExprAst): Expression of K^2
        point (CotangentPoint): Candidate point
        config (RunConfig): Run configuration
        params (LiftParams): Lift constants of the run

    Returns:
        str or None: Short reason for the rejection
    """
    try:
        k2 = float(evaluate(k2_ast, EvalEnv(point.x, point.p)))
    except EvaluationError as exc:
        return f'evaluation: {exc}'
    if not k2 > 0.0:
        return 'K^2 is not positive'
    if not params.admissible(0.5 * k2):
        return 'alpha + 2 tau v <= 0'
    if params.c > 0.0 and k2 >= (1.0 - config.tube_margin) / (params.c * params.beta ** 2):
        return 'outside the tube'
    return None


def sample_points(config, k_ast=None):
    """Sample ``config.points`` admissible cotangent points.

    Args:
        config (RunConfig): Run configuration
        k_ast (ExprAst): Parsed K; parsed from ``config.k_expr`` when omitted

    Returns:
        list: CotangentPoint instances in draw order

    Raises:
        SamplingExhausted: If more than ``config.max_rejections`` consecutive
            candidates are rejected

    Note:
        x is uniform in the domain box and p = r u with u uniform on the unit
        sphere and r uniform in the annulus. When c > 0 points are kept with
        K^2 < (1 - margin)/(c beta^2).
    """
    if k_ast is None:
        k_ast = parse(config.k_expr, config.n)
    if k_ast.dim != config.n:
        raise ConfigError(f"Expression dimension {k_ast.dim} does not match n={config.n}")
    k2_ast = squared(k_ast)
    params = config.lift_params()
    rng = np.random.default_rng(config.seed)

    points = []
    consecutive = 0
    total = 0
    while len(points) < config.points:
        try:
            point = _draw(rng, config)
        except (EvaluationError, GeometryError):
            point = None
        reason = 'degenerate direction' if point is None else rejection_reason(k2_ast, point, config, params)
        if reason is None:
            points.append(point)
            consecutive = 0
            continue
        consecutive += 1
        total += 1
        current_app.logger.debug(f"Rejected sample ({reason})")
        if consecutive > config.max_rejections:
            current_app.logger.error(f"Sampling gave up after {consecutive} consecutive rejections")
            raise SamplingExhausted(consecutive)

    current_app.logger.info(f"Sampled {len(points)} points with seed {config.seed} ({total} rejected)")
    return points
