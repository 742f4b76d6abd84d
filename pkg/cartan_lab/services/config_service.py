"""Run configuration service module.

This module turns command options into a validated ``RunConfig``. Values
come from the options first, then from the selected preset, then from the
application config (environment defaults).
"""

import math
from dataclasses import dataclass

from cartan_lab.services.kahler_service import LiftParams
from cartan_lab.services.preset_service import get_preset
from cartan_lab.utils.errors import ConfigError
from cartan_lab.utils.jets import MAX_ORDER

SUITES = ('base', 'kahler', 'connection', 'curvature', 'einstein', 'symmetry')

# Jet order each suite needs at every point
SUITE_ORDERS = {
    'base': 4,
    'kahler': 4,
    'connection': 4,
    'curvature': 5,
    'einstein': 5,
    'symmetry': 6,
}

# Preflight checks need the base fields
PREFLIGHT_ORDER = 4

DEFAULT_DOMAIN = (-1.0, 1.0)
DEFAULT_ANNULUS = (0.5, 2.0)


@dataclass(frozen=True)
class RunConfig:
    """Everything a verification run depends on.

    Attributes:
        k_expr: Expression of the fundamental function K
        n: Dimension of the base
        alpha, beta, c: Lift constants
        v: Explicit weight, or None when v is linked to c
        domain: (lo, hi) per coordinate
        p_annulus: (r_min, r_max)
        points: Number of sample points
        seed: Seed of the point sampler
        suites: Selected suites in canonical order
        report_path: Where the JSON report goes
        threads: Worker threads for point evaluation
        tol_scale: Multiplier applied to every tolerance
        jet_order: Largest jet order the run may use
        max_rejections: Consecutive sampling rejections allowed
        tube_margin: Relative margin kept inside the tube when c > 0
        preset: Name of the preset the run started from, if any
    """
    k_expr: str
    n: int
    alpha: float
    beta: float
    c: float
    v: object
    domain: tuple
    p_annulus: tuple
    points: int
    seed: int
    suites: tuple
    report_path: str
    threads: int
    tol_scale: float
    jet_order: int
    max_rejections: int
    tube_margin: float
    preset: object = None

    @property
    def linked(self):
        return self.v is None

    def lift_params(self):
        if self.linked:
            return LiftParams.linked_to(self.c, self.alpha, self.beta)
        return LiftParams(alpha=self.alpha, beta=self.beta, v=self.v, c=self.c)

    def required_order(self):
        return max([PREFLIGHT_ORDER] + [SUITE_ORDERS[suite] for suite in self.suites])

    def as_dict(self):
        """Config echo for reports; threads and the report path do not affect results and are left out."""
        return {
            'k_expr': self.k_expr,
            'n': self.n,
            'alpha': self.alpha,
            'beta': self.beta,
            'c': self.c,
            'v_mode': 'linked' if self.linked else 'explicit',
            'v': self.lift_params().v,
            'domain': [list(bounds) for bounds in self.domain],
            'p_annulus': list(self.p_annulus),
            'points': self.points,
            'seed': self.seed,
            'suites': list(self.suites),
            'tol_scale': self.tol_scale,
            'jet_order': self.jet_order,
            'max_rejections': self.max_rejections,
            'tube_margin': self.tube_margin,
            'preset': self.preset,
        }


def _real(text, what):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"Invalid number for {what}: '{text}'")
    if not math.isfinite(value):
        raise ConfigError(f"{what} must be finite, got {text}")
    return value


def parse_domain(text, n):
    """Parse ``"x1:lo:hi,x2:lo:hi"`` into one (lo, hi) pair per coordinate.

    Coordinates that are not mentioned keep the default box [-1, 1].

    Args:
        text (str): Box description
        n (int): Dimension of the base

    Returns:
        tuple: n pairs (lo, hi)

    Raises:
        ConfigError: On malformed items, unknown coordinates or empty intervals
    """
    bounds = [DEFAULT_DOMAIN] * n
    seen = set()
    for item in (part.strip() for part in text.split(',')):
        fields = item.split(':')
        if len(fields) != 3:
            raise ConfigError(f"Domain items look like 'x1:lo:hi', got '{item}'")
        name = fields[0].strip()
        if not (name.startswith('x') and name[1:].isdigit()):
            raise ConfigError(f"Domain coordinate must be x1..x{n}, got '{name}'")
        index = int(name[1:])
        if not 1 <= index <= n:
            raise ConfigError(f"Domain coordinate {name} is outside x1..x{n}")
        if index in seen:
            raise ConfigError(f"Domain coordinate {name} given twice")
        seen.add(index)
        lo, hi = _real(fields[1], f'{name} lower bound'), _real(fields[2], f'{name} upper bound')
        if not lo < hi:
            raise ConfigError(f"Domain interval for {name} is empty: [{lo}, {hi}]")
        bounds[index - 1] = (lo, hi)
    return tuple(bounds)


def parse_annulus(text):
    """Parse ``"rmin:rmax"``; needs 0 < rmin <= rmax."""
    fields = text.split(':')
    if len(fields) != 2:
        raise ConfigError(f"Momentum annulus looks like 'rmin:rmax', got '{text}'")
    r_min, r_max = _real(fields[0], 'r_min'), _real(fields[1], 'r_max')
    if r_min <= 0.0:
        raise ConfigError(f"r_min must be positive, got {r_min}")
    if r_min > r_max:
        raise ConfigError(f"r_min must not exceed r_max, got {r_min} > {r_max}")
    return r_min, r_max


def parse_suites(text):
    """Parse a comma separated suite list (or ``all``) into canonical order."""
    names = {part.strip() for part in text.split(',') if part.strip()}
    if not names:
        raise ConfigError("No suites selected")
    if 'all' in names:
        return SUITES
    unknown = sorted(names - set(SUITES))
    if unknown:
        raise ConfigError(f"Unknown suites: {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    return tuple(suite for suite in SUITES if suite in names)


def parse_point(text, n):
    """Parse ``"x1,...,xn;p1,...,pn"`` into coordinate and momentum tuples."""
    halves = text.split(';')
    if len(halves) != 2:
        raise ConfigError(f"Points look like 'x1,...,xn;p1,...,pn', got '{text}'")
    x = tuple(_real(part, 'x') for part in halves[0].split(','))
    p = tuple(_real(part, 'p') for part in halves[1].split(','))
    if len(x) != n or len(p) != n:
        raise ConfigError(f"Point needs {n} coordinates and {n} momenta, got {len(x)} and {len(p)}")
    return x, p


def _pick(options, key, fallback):
    value = options.get(key)
    return fallback if value is None else value


def build_run_config(options, defaults):
    """Assemble and validate a RunConfig.

    Args:
        options (dict): Command options; None means "not given"
        defaults (Mapping): Application config with the CARTAN_LAB_* settings

    Returns:
        RunConfig: The validated configuration

    Raises:
        ConfigError: If options conflict or are out of range

    Example:
        >>> build_run_config({'preset': 'euclidean'}, app.config).k_expr
        'sqrt(p1^2+p2^2)'
    """
    preset = None
    if options.get('preset'):
        if options.get('k_expr'):
            raise ConfigError("Use either --k-expr or --preset, not both")
        preset = get_preset(options['preset'])
    elif not options.get('k_expr'):
        raise ConfigError("Either --k-expr or --preset is required")

    n = int(_pick(options, 'n', preset.n if preset else 2))
    if n < 2:
        raise ConfigError(f"The base dimension must be at least 2, got {n}")
    if preset and n != preset.n:
        raise ConfigError(f"Preset '{preset.name}' is defined for n={preset.n}")

    if options.get('domain'):
        domain = parse_domain(options['domain'], n)
    else:
        domain = preset.domain if preset else (DEFAULT_DOMAIN,) * n
    if options.get('p_annulus'):
        p_annulus = parse_annulus(options['p_annulus'])
    else:
        p_annulus = preset.p_annulus if preset else DEFAULT_ANNULUS

    suites = parse_suites(options['suites']) if options.get('suites') else SUITES

    points = int(_pick(options, 'points', defaults['CARTAN_LAB_POINTS']))
    if points < 1:
        raise ConfigError(f"At least one sample point is needed, got {points}")
    threads = int(_pick(options, 'threads', defaults['CARTAN_LAB_THREADS']))
    if threads < 1:
        raise ConfigError(f"Thread count must be positive, got {threads}")
    tube_margin = float(defaults['CARTAN_LAB_TUBE_MARGIN'])
    if not 0.0 <= tube_margin < 1.0:
        raise ConfigError(f"Tube margin must lie in [0, 1), got {tube_margin}")
    tol_scale = float(defaults['CARTAN_LAB_TOL_SCALE'])
    if tol_scale <= 0.0:
        raise ConfigError(f"Tolerance scale must be positive, got {tol_scale}")

    v = options.get('v')
    config = RunConfig(
        k_expr=preset.k_expr if preset else options['k_expr'],
        n=n,
        alpha=float(_pick(options, 'alpha', 1.0)),
        beta=float(_pick(options, 'beta', 1.0)),
        c=float(_pick(options, 'c', preset.c if preset else 0.0)),
        v=None if v is None else float(v),
        domain=tuple(tuple(bounds) for bounds in domain),
        p_annulus=tuple(p_annulus),
        points=points,
        seed=int(_pick(options, 'seed', defaults['CARTAN_LAB_SEED'])),
        suites=suites,
        report_path=_pick(options, 'report', defaults['CARTAN_LAB_REPORT_PATH']),
        threads=threads,
        tol_scale=tol_scale,
        jet_order=int(defaults['CARTAN_LAB_JET_ORDER']),
        max_rejections=int(defaults['CARTAN_LAB_MAX_REJECTIONS']),
        tube_margin=tube_margin,
        preset=preset.name if preset else None,
    )
    # Raises ConfigError for non-positive alpha or beta
    config.lift_params()
    if not 1 <= config.jet_order <= MAX_ORDER:
        raise ConfigError(f"Jet order must lie in 1..{MAX_ORDER}, got {config.jet_order}")
    if config.required_order() > config.jet_order:
        raise ConfigError(
            f"Suites {', '.join(config.suites)} need jets of order {config.required_order()}, "
            f"but the jet order is limited to {config.jet_order}"
        )
    return config
