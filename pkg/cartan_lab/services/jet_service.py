"""Jet seeding service.

Turns a cotangent point into an evaluation environment of seeded jets in
the 2n directions (x1..xn, p1..pn) and extracts exact partial derivatives
of expressions from it. Direction k < n is the coordinate x_{k+1};
direction n + k is the momentum p_{k+1}.
"""

from dataclasses import dataclass

from cartan_lab.services.expression_service import EvalEnv, ExprAst, evaluate
from cartan_lab.utils.errors import ConfigError, DomainError
from cartan_lab.utils.jets import MAX_ORDER, Jet


@dataclass(frozen=True)
class JetConfig:
    """Truncation order and number of variables of the jets of one run."""
    order: int
    dim: int

    def __post_init__(self):
        if not 0 <= self.order <= MAX_ORDER:
            raise ConfigError(f"Jet order must be in 0..{MAX_ORDER}, got {self.order}")
        if self.dim < 2 or self.dim % 2:
            raise ConfigError(f"Jet dimension must be 2n with n >= 1, got {self.dim}")


def seed(point, cfg):
    """Seed every coordinate and momentum of ``point`` as a jet variable.

    Args:
        point: Object with ``x`` and ``p`` sequences of length n
        cfg (JetConfig): Order and 2n dimension

    Returns:
        EvalEnv: Environment whose scalars are Jets

    Raises:
        ConfigError: If ``cfg.dim`` is not 2n
        DomainError: If p is the zero covector
    """
    n = len(point.x)
    if cfg.dim != 2 * n or len(point.p) != n:
        raise ConfigError(f"Jet dimension {cfg.dim} does not match a point with n={n}")
    if all(momentum == 0.0 for momentum in point.p):
        raise DomainError("The zero section p = 0 is excluded")
    x = tuple(Jet.variable(value, k, cfg.order, cfg.dim) for k, value in enumerate(point.x))
    p = tuple(Jet.variable(value, n + k, cfg.order, cfg.dim) for k, value in enumerate(point.p))
    return EvalEnv(x, p)


def expand(ast, point, order):
    """Jet of an expression at ``point``; constant expressions give constant jets."""
    cfg = JetConfig(order, 2 * ast.dim)
    value = evaluate(ast, seed(point, cfg))
    if isinstance(value, Jet):
        return value
    return Jet.constant(value, order, cfg.dim)


def partial(ast_or_fn, point, multi_index):
    """Exact mixed partial derivative at a point.

    Args:
        ast_or_fn: ExprAst, or a callable taking an EvalEnv of jets
        point: Object with ``x`` and ``p``
        multi_index (sequence of int): Directions to differentiate along,
            repeats allowed; 0..n-1 are x, n..2n-1 are p

    Returns:
        float: Value of the derivative

    Example:
        >>> partial(parse('p1^2+p2^2', 2), point, [2, 2])
        2.0
    """
    n = len(point.x)
    cfg = JetConfig(len(multi_index), 2 * n)
    env = seed(point, cfg)
    value = evaluate(ast_or_fn, env) if isinstance(ast_or_fn, ExprAst) else ast_or_fn(env)
    if not isinstance(value, Jet):
        return float(value) if not multi_index else 0.0
    return float(value.derivative_value(list(multi_index)))
