"""Report service module.

This module writes run reports and tensor dumps as JSON and renders the
human-readable run summary.
"""

import platform
from datetime import datetime, timezone

import numpy as np
from flask import current_app

from cartan_lab.services.cartan_service import CotangentPoint, build_fields
from cartan_lab.services.curvature_service import CURVATURE_ORDER, build_connection, curvature, ricci
from cartan_lab.services.expression_service import EvalEnv, evaluate, parse, squared
from cartan_lab.services.kahler_service import build_lift, coordinate_metric
from cartan_lab.utils.errors import ConfigError

SCHEMA = 'cartan-lab/1'

# Index variance of every dumped tensor: u upper, l lower, f adapted frame
VARIANCES = {
    'gU': 'uu',
    'gL': 'll',
    'C3': 'uuu',
    'N': 'll',
    'H': 'ull',
    'P': 'ull',
    'R': 'lll',
    'GL': 'll',
    'GU': 'uu',
    'J': 'ff',
    'Ricci': 'ff',
    'G_coordinate': 'll',
}


def _timestamp():
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


def _versions():
    from cartan_lab import __version__

    return {'cartan_lab': __version__, 'numpy': np.__version__, 'python': platform.python_version()}


def build_report(config, result):
    """Report document of a finished run.

    Args:
        config (RunConfig): Run configuration
        result (VerificationResult): Outcome of verification_service.run

    Returns:
        dict: ``{"schema", "meta", "checks", "verdicts"}``; only
        ``meta.timestamp`` differs between two runs of the same config
    """
    return {
        'schema': SCHEMA,
        'meta': {
            'config': config.as_dict(),
            'versions': _versions(),
            'timestamp': _timestamp(),
            'n_points': result.n_points,
        },
        'checks': [check.as_dict() for check in result.checks],
        'verdicts': dict(result.verdicts),
    }


def to_json(document):
    """Serialize with sorted keys; floats use the shortest repr that parses back to the same double."""
    return current_app.json.dumps(document, sort_keys=True, indent=2) + '\n'


def write_report(document, path):
    """Write a report to ``path``.

    Raises:
        ConfigError: If the file cannot be written
    """
    try:
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(to_json(document))
    except OSError as exc:
        raise ConfigError(f"Cannot write report to '{path}': {exc}") from exc
    current_app.logger.info(f"Report written to {path}")


def format_summary(document):
    """One line per check plus the verdicts, for standard output."""
    lines = [f"{document['schema']}  points={document['meta']['n_points']}"]
    for check in document['checks']:
        status = 'PASS' if check['pass'] else 'FAIL'
        relation = '>' if check['expect'] == 'above' else '<='
        lines.append(
            f"{status}  {check['name']:<42} {check['max_abs_residual']:.3e} {relation} {check['tolerance']:.1e}"
            f"  [{check['kind']}]"
        )
    for name, verdict in document['verdicts'].items():
        lines.append(f"{name}: {'n/a' if verdict is None else str(verdict).lower()}")
    return '\n'.join(lines)


def _significant(array, digits):
    values = np.asarray(array, dtype=float)
    rounded = np.vectorize(lambda value: float(f'{value:.{digits}g}'), otypes=[float])(values)
    return rounded.tolist() if values.ndim else float(rounded)


def _entry(name, array, digits):
    array = np.asarray(array, dtype=float)
    return {'shape': list(array.shape), 'variance': VARIANCES[name], 'values': _significant(array, digits)}


def check_dump_point(config, point, k2):
    """Reject dump points outside the configured region.

    Raises:
        ConfigError: If x leaves the domain box, |p| leaves the annulus or,
            for c > 0, the point lies outside the tube
    """
    for index, (value, (lo, hi)) in enumerate(zip(point.x, config.domain), start=1):
        if not lo <= value <= hi:
            raise ConfigError(f"x{index}={value} lies outside [{lo}, {hi}]")
    r_min, r_max = config.p_annulus
    radius = float(np.linalg.norm(point.p))
    if not r_min <= radius <= r_max:
        raise ConfigError(f"|p|={radius} lies outside the annulus [{r_min}, {r_max}]")
    params = config.lift_params()
    if params.c > 0.0:
        bound = 1.0 / (params.c * params.beta ** 2)
        if not k2 < bound:
            raise ConfigError(f"K^2={k2} lies outside the tube K^2 < {bound}")


def dump_tensors(config, x, p):
    """Tensor values at one point, each with shape and index variance.

    Args:
        config (RunConfig): Run configuration
        x (tuple): Coordinates
        p (tuple): Momenta

    Returns:
        dict: JSON-ready document with schema, point, parameters and tensors

    Raises:
        ConfigError: If the point is outside the sampling region
        GeometryError: If the lifted metric is undefined at the point

    Example:
        >>> dump_tensors(config, (0.0, 0.0), (1.0, 0.0))['tensors']['gU']['values']
        [[1.0, 0.0], [0.0, 1.0]]
    """
    digits = int(current_app.config['CARTAN_LAB_DUMP_DIGITS'])
    point = CotangentPoint(tuple(x), tuple(p))
    k_ast = parse(config.k_expr, config.n)
    order = max(CURVATURE_ORDER, config.required_order())
    if order > config.jet_order:
        raise ConfigError(f"Tensor dumps need jets of order {order}, the jet order is limited to {config.jet_order}")
    check_dump_point(config, point, float(evaluate(squared(k_ast), EvalEnv(point.x, point.p))))
    fields = build_fields(k_ast, point, order)
    ctx = fields.context()

    params = config.lift_params()
    lift = build_lift(fields, params)
    metric = lift.metric()
    connection = build_connection(lift)
    ric = ricci(curvature(connection), metric.frame_matrix())

    tensors = {
        'gU': ctx.gU,
        'gL': ctx.gL,
        'C3': ctx.C3,
        'N': ctx.N,
        'H': ctx.H,
        'P': ctx.P,
        'R': ctx.R,
        'GL': metric.GL,
        'GU': metric.GU,
        'J': metric.j_matrix(),
        'Ricci': ric.matrix,
        'G_coordinate': coordinate_metric(ctx, metric),
    }
    current_app.logger.info(f"Dumped {len(tensors)} tensors at x={list(point.x)} p={list(point.p)}")
    return {
        'schema': SCHEMA,
        'point': point.as_dict(),
        'params': params.as_dict(),
        'K2': _significant(ctx.K2, digits),
        'tensors': {name: _entry(name, value, digits) for name, value in tensors.items()},
    }
