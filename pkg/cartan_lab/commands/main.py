"""Main commands module for Cartan Lab.

This module defines the CLI commands of the application: ``verify`` runs
the verification suites and writes the JSON report, ``dump`` prints the
tensors at one point and ``sample`` prints the sampled points.

Exit codes:
    0: every hard and contrast check passed
    1: at least one hard or contrast check failed
    2: invalid expression, configuration or geometry before any check ran
"""

import functools

import click
from flask import Blueprint, current_app

from cartan_lab.services import config_service, report_service, sampling_service, verification_service
from cartan_lab.utils.errors import CartanLabError

bp = Blueprint('lab', __name__, cli_group=None)


class CommandError(click.ClickException):
    """A CartanLabError surfaced on the command line."""
    exit_code = 2


def run_options(command):
    """Options shared by every command that needs a Cartan structure."""
    options = [
        click.option('--k-expr', 'k_expr', default=None, help='Expression of K in x1..xn, p1..pn.'),
        click.option('--preset', default=None, help='Built-in structure: euclidean, hyperbolic-half-plane, '
                                                    'sphere-patch or randers.'),
        click.option('--n', 'n', type=int, default=None, help='Dimension of the base (default 2).'),
        click.option('--alpha', type=float, default=None, help='Lift constant alpha > 0 (default 1).'),
        click.option('--beta', type=float, default=None, help='Lift constant beta > 0 (default 1).'),
        click.option('--c', 'c', type=float, default=None, help='Target curvature c (default from preset or 0).'),
        click.option('--v', 'v', type=float, default=None, help='Explicit v; when omitted v = -c alpha beta^2.'),
        click.option('--points', type=int, default=None, help='Number of sample points.'),
        click.option('--seed', type=int, default=None, help='Sampling seed.'),
        click.option('--domain', default=None, help='Coordinate box, e.g. "x1:-1:1,x2:0.5:2".'),
        click.option('--p-annulus', 'p_annulus', default=None, help='Momentum annulus "rmin:rmax".'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _run_config(options):
    try:
        return config_service.build_run_config(options, current_app.config)
    except CartanLabError as exc:
        current_app.logger.error(f"Invalid configuration: {exc}")
        raise CommandError(str(exc))


def reports_errors(command):
    """Map CartanLabError raised by ``command`` to exit code 2."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except CartanLabError as exc:
            current_app.logger.error(f"{type(exc).__name__}: {exc}")
            raise CommandError(str(exc))
    return wrapper


@bp.cli.command('verify')
@run_options
@click.option('--suites', default=None, help='Comma separated suites or "all" (default all).')
@click.option('--report', default=None, help='Path of the JSON report.')
@click.option('--threads', type=int, default=None, help='Worker threads for point evaluation.')
@reports_errors
def verify(**options):
    """Run the verification suites and write the JSON report."""
    config = _run_config(options)
    current_app.logger.info(f"Verifying K = {config.k_expr} (n={config.n}, c={config.c}, "
                            f"{'linked' if config.linked else 'explicit'} v)")
    result = verification_service.run(config)
    document = report_service.build_report(config, result)
    report_service.write_report(document, config.report_path)
    click.echo(report_service.format_summary(document))

    if result.failed:
        current_app.logger.error(f"{len(result.failed)} check(s) failed")
        click.echo(f"Failed checks: {', '.join(result.failed)}", err=True)
        raise click.exceptions.Exit(result.exit_code)


@bp.cli.command('dump')
@run_options
@click.option('--dump-at', 'dump_at', required=True, help='Point "x1,...,xn;p1,...,pn".')
@reports_errors
def dump(dump_at, **options):
    """Print the tensors at one point as JSON."""
    config = _run_config(dict(options, suites='base'))
    x, p = config_service.parse_point(dump_at, config.n)
    document = report_service.dump_tensors(config, x, p)
    click.echo(report_service.to_json(document), nl=False)


@bp.cli.command('sample')
@run_options
@reports_errors
def sample(**options):
    """Print the sampled points as JSON."""
    config = _run_config(dict(options, suites='base'))
    points = sampling_service.sample_points(config)
    document = {'schema': report_service.SCHEMA, 'seed': config.seed, 'points': [p.as_dict() for p in points]}
    click.echo(report_service.to_json(document), nl=False)
