"""Error types raised by Cartan Lab.

Every error derives from CartanLabError so callers can catch the whole
family at once. The command layer maps expression, configuration and
geometry errors to exit code 2.
"""


class CartanLabError(Exception):
    """Base class for all Cartan Lab errors."""


class ExpressionError(CartanLabError):
    """Raised when a fundamental-function expression cannot be accepted."""


class ExpressionSyntaxError(ExpressionError):
    """Malformed expression text.

    Attributes:
        offset: 0-based byte offset of the offending character
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExpressionError):
    def __init__(self, name, offset=None):
        super().__init__(f"Unknown identifier '{name}'")
        self.name = name
        self.offset = offset


class IndexOutOfRange(ExpressionError):
    def __init__(self, name, n):
        super().__init__(f"Identifier '{name}' is out of range for dimension {n}")
        self.name = name
        self.n = n


class ArityError(ExpressionError):
    def __init__(self, func, expected, got):
        super().__init__(f"Function '{func}' takes {expected} argument(s), got {got}")
        self.func = func
        self.expected = expected
        self.got = got


class EvaluationError(CartanLabError):
    """Raised while evaluating an expression on reals or jets."""


class DomainError(EvaluationError):
    """A function was applied outside the region where it is differentiable."""


class DivisionByZero(EvaluationError):
    pass


class GeometryError(CartanLabError):
    """Raised when a geometric construction is not defined at a point."""


class SingularMetric(GeometryError):
    pass


class NotPositiveDefinite(GeometryError):
    """The lifted metric is not positive definite at the point.

    Attributes:
        tau: value of K^2/2 at the point
        bound: largest admissible tau (inf when every tau is admissible)
    """

    def __init__(self, tau, bound):
        super().__init__(f"Lifted metric is not positive definite at tau={tau!r} (bound {bound!r})")
        self.tau = tau
        self.bound = bound


class ValenceMismatch(GeometryError):
    pass


class NotApplicable(GeometryError):
    pass


class NotRiemannian(GeometryError):
    def __init__(self, cartan_norm):
        super().__init__(f"Cartan tensor does not vanish (max |C| = {cartan_norm:.3e})")
        self.cartan_norm = cartan_norm


class ConfigError(CartanLabError):
    """Invalid run configuration or command option."""


class SamplingExhausted(ConfigError):
    def __init__(self, rejections):
        super().__init__(f"Sampling gave up after {rejections} consecutive rejections")
        self.rejections = rejections


class NotHomogeneous(ConfigError):
    def __init__(self, residual, tolerance):
        super().__init__(f"K is not 1-homogeneous in p (residual {residual:.3e} > {tolerance:.1e})")
        self.residual = residual
        self.tolerance = tolerance
