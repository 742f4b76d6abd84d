"""Fundamental-function expression service.

This module parses the fundamental function K(x, p) of a Cartan space,
written in a small arithmetic language over the coordinates x1..xn and the
momenta p1..pn, into an immutable syntax tree, and evaluates that tree over
plain floats or over jets with the same code path.

Grammar:
    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | atom ('^' factor)?
    atom   := number | ident | func '(' expr (',' expr)* ')' | '(' expr ')'
"""

import re
from dataclasses import dataclass

import numpy as np

from cartan_lab.utils.errors import (
    ArityError, ConfigError, DivisionByZero, DomainError, ExpressionSyntaxError,
    IndexOutOfRange, UnknownIdentifier,
)
from cartan_lab.utils.jets import Jet

FUNCTIONS = {'sqrt': 1, 'exp': 1, 'log': 1, 'sin': 1, 'cos': 1, 'pow': 2}

_TOKEN = re.compile(r'''
    \s*(?:
        (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<op>[-+*/^(),])
      | (?P<bad>\S)
    )''', re.VERBOSE)
_COORDINATE = re.compile(r'([xp])(\d+)')


@dataclass(frozen=True)
class Number:
    value: float
    integral: bool = False


@dataclass(frozen=True)
class Coordinate:
    family: str
    index: int


@dataclass(frozen=True)
class Negate:
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class ExprAst:
    """Parsed expression over x1..xn, p1..pn.

    Attributes:
        root: top node of the tree
        dim: number n of coordinates (and of momenta)
    """
    root: object
    dim: int


@dataclass(frozen=True)
class EvalEnv:
    """Values of the coordinates and momenta; entries may be floats or jets."""
    x: tuple
    p: tuple


@dataclass(frozen=True)
class HomogeneityReport:
    max_residual: float
    tolerance: float
    passed: bool
    samples: int


def _byte_offset(source, index):
    return len(source[:index].encode('utf-8'))


def _tokenize(source):
    tokens = []
    position = 0
    while position < len(source):
        match = _TOKEN.match(source, position)
        if match is None:
            break
        kind = match.lastgroup
        start = match.start(kind)
        if kind == 'bad':
            raise ExpressionSyntaxError(f"Unexpected character '{match.group(kind)}'", _byte_offset(source, start))
        tokens.append((kind, match.group(kind), _byte_offset(source, start)))
        position = match.end()
    tokens.append(('end', '', _byte_offset(source, len(source))))
    return tokens


class _Parser:
    def __init__(self, source, dim):
        self.tokens = _tokenize(source)
        self.position = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.position]

    def advance(self):
        token = self.tokens[self.position]
        self.position += 1
        return token

    def expect(self, text):
        kind, value, offset = self.peek()
        if kind != 'op' or value != text:
            found = 'end of expression' if kind == 'end' else f"'{value}'"
            raise ExpressionSyntaxError(f"Expected '{text}' but found {found}", offset)
        return self.advance()

    def at_op(self, *texts):
        kind, value, _ = self.peek()
        return kind == 'op' and value in texts

    def expression(self):
        node = self.term()
        while self.at_op('+', '-'):
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.at_op('*', '/'):
            op = self.advance()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        if self.at_op('-'):
            self.advance()
            return Negate(self.factor())
        node = self.atom()
        if self.at_op('^'):
            self.advance()
            node = Binary('^', node, self.factor())
        return node

    def atom(self):
        kind, value, offset = self.advance()
        if kind == 'number':
            number = float(value)
            if not np.isfinite(number):
                raise ExpressionSyntaxError(f"Number '{value}' is out of range", offset)
            integral = not any(ch in value for ch in '.eE')
            return Number(number, integral)
        if kind == 'ident':
            if value in FUNCTIONS:
                return self.call(value)
            match = _COORDINATE.fullmatch(value)
            if match is None:
                raise UnknownIdentifier(value, offset)
            index = int(match.group(2))
            if not 1 <= index <= self.dim:
                raise IndexOutOfRange(value, self.dim)
            return Coordinate(match.group(1), index)
        if kind == 'op' and value == '(':
            node = self.expression()
            self.expect(')')
            return node
        if kind == 'end':
            raise ExpressionSyntaxError("Unexpected end of expression", offset)
        raise ExpressionSyntaxError(f"Unexpected '{value}'", offset)

    def call(self, func):
        self.expect('(')
        args = [self.expression()]
        while self.at_op(','):
            self.advance()
            args.append(self.expression())
        self.expect(')')
        if len(args) != FUNCTIONS[func]:
            raise ArityError(func, FUNCTIONS[func], len(args))
        return Call(func, tuple(args))


def parse(source, n):
    """Parse a fundamental-function expression.

    Args:
        source (str): Expression text, e.g. ``"sqrt(p1^2+p2^2)"``
        n (int): Dimension of the base manifold

    Returns:
        ExprAst: Immutable syntax tree

    Raises:
        ExpressionSyntaxError: Malformed text, with the 0-based byte offset
        UnknownIdentifier: Name that is neither a function nor x<k>/p<k>
        IndexOutOfRange: x<k> or p<k> with k outside 1..n
        ArityError: Function called with the wrong number of arguments
    """
    if n < 1:
        raise ConfigError(f"Dimension must be positive, got {n}")
    if not source or not source.strip():
        raise ExpressionSyntaxError("Empty expression", 0)
    parser = _Parser(source, n)
    root = parser.expression()
    kind, value, offset = parser.peek()
    if kind != 'end':
        raise ExpressionSyntaxError(f"Unexpected '{value}'", offset)
    return ExprAst(root, n)


def pretty(ast):
    """Render an expression as fully parenthesised text that parses back to the same tree."""
    return _pretty(ast.root)


def _pretty(node):
    if isinstance(node, Number):
        return str(int(node.value)) if node.integral else repr(node.value)
    if isinstance(node, Coordinate):
        return f'{node.family}{node.index}'
    if isinstance(node, Negate):
        return f'(-{_pretty(node.operand)})'
    if isinstance(node, Binary):
        return f'({_pretty(node.left)} {node.op} {_pretty(node.right)})'
    return f"{node.func}({', '.join(_pretty(arg) for arg in node.args)})"


def squared(ast):
    """Return the tree of K^2, peeling an outer sqrt instead of squaring it."""
    root = ast.root
    if isinstance(root, Call) and root.func == 'sqrt':
        return ExprAst(root.args[0], ast.dim)
    return ExprAst(Binary('^', root, Number(2.0, True)), ast.dim)


def evaluate(ast, env):
    """Evaluate an expression on floats or jets.

    Args:
        ast (ExprAst): Parsed expression
        env (EvalEnv): Coordinate and momentum values of matching length

    Returns:
        float or Jet: Value of the expression

    Raises:
        DomainError: sqrt, log or a real power of a non-positive value
        DivisionByZero: Division by an exact zero
    """
    if len(env.x) != ast.dim or len(env.p) != ast.dim:
        raise ConfigError(f"Environment has {len(env.x)}/{len(env.p)} values, expression expects {ast.dim}")
    return _evaluate(ast.root, env)


def _evaluate(node, env):
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Coordinate):
        values = env.x if node.family == 'x' else env.p
        return values[node.index - 1]
    if isinstance(node, Negate):
        return -_evaluate(node.operand, env)
    if isinstance(node, Binary):
        left = _evaluate(node.left, env)
        if node.op == '^':
            return _power(left, node.right, env)
        right = _evaluate(node.right, env)
        if node.op == '+':
            return left + right
        if node.op == '-':
            return left - right
        if node.op == '*':
            return left * right
        return _divide(left, right)
    if node.func == 'pow':
        return _power(_evaluate(node.args[0], env), node.args[1], env)
    return _apply(node.func, _evaluate(node.args[0], env))


def _integer_exponent(node):
    if isinstance(node, Number) and node.integral:
        return int(node.value)
    if isinstance(node, Negate) and isinstance(node.operand, Number) and node.operand.integral:
        return -int(node.operand.value)
    return None


def _is_constant(node):
    if isinstance(node, Number):
        return True
    if isinstance(node, Coordinate):
        return False
    if isinstance(node, Negate):
        return _is_constant(node.operand)
    if isinstance(node, Binary):
        return _is_constant(node.left) and _is_constant(node.right)
    return all(_is_constant(arg) for arg in node.args)


def _divide(left, right):
    if isinstance(left, Jet) or isinstance(right, Jet):
        return left / right
    if right == 0.0:
        raise DivisionByZero("Division by zero")
    return left / right


def _integer_power(base, exponent):
    if exponent == 0:
        if isinstance(base, Jet):
            return Jet.constant(np.ones(base.shape), base.order, base.dim)
        return 1.0
    result = base
    for _ in range(abs(exponent) - 1):
        result = result * base
    if exponent < 0:
        result = _divide(1.0, result)
    return result


def _power(base, exponent_node, env):
    exponent = _integer_exponent(exponent_node)
    if exponent is not None:
        return _integer_power(base, exponent)
    exponent = _evaluate(exponent_node, env)
    if not _is_constant(exponent_node):
        return _apply('exp', exponent * _apply('log', base))
    if isinstance(base, Jet):
        return base.power(exponent)
    if base <= 0.0:
        raise DomainError("Real power of a non-positive value")
    return np.power(base, exponent)


def _apply(func, value):
    if isinstance(value, Jet):
        return getattr(value, func)()
    if func in ('sqrt', 'log') and value <= 0.0:
        raise DomainError(f"{func} of a non-positive value")
    return getattr(np, func)(value)


def check_homogeneity(ast, degree, samples, tol, rng=None):
    """Check K(x, lambda p) = lambda^degree K(x, p) on sampled points.

    Args:
        ast (ExprAst): Expression of K
        degree (int): Expected homogeneity degree in p
        samples (list): Points with ``x`` and ``p`` attributes, p != 0
        tol (float): Largest admissible absolute residual
        rng (numpy.random.Generator): Source of the scale factors; a fixed
            default generator is used when omitted

    Returns:
        HomogeneityReport: Largest residual over the samples and the verdict

    Note:
        One scale factor lambda is drawn uniformly from [0.5, 2] per sample.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    for point in samples:
        scale = rng.uniform(0.5, 2.0)
        scaled = tuple(scale * momentum for momentum in point.p)
        lhs = evaluate(ast, EvalEnv(tuple(point.x), scaled))
        rhs = scale ** degree * evaluate(ast, EvalEnv(tuple(point.x), tuple(point.p)))
        worst = max(worst, abs(float(lhs - rhs)))
    return HomogeneityReport(worst, tol, worst <= tol, len(samples))
