"""Exception hierarchy and the precondition gate used across the package"""


class FracsemError(Exception):
    """Base class of every error raised by fracsem"""


class DomainError(FracsemError, ValueError):
    """An argument is outside the domain where the operation is defined"""


class PoleError(DomainError):
    pass


class ConvergenceError(FracsemError):
    """A quadrature or extrapolation did not reach the requested accuracy"""


class TailBoundError(ConvergenceError):
    pass


class RemainderTooLargeError(ConvergenceError):
    pass


class ExtrapolationError(ConvergenceError):
    pass


class DivergenceError(ConvergenceError):
    """The t → ∞ tail of a semigroup integral is not integrable for these inputs"""


class FitResidualError(FracsemError):
    pass


class ZeroMeanViolation(DomainError):
    pass


class FieldFormatError(FracsemError):
    pass


class ConfigError(FracsemError):
    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class FracsemWarning(UserWarning):
    pass


def require(condition, message, error=DomainError):
    if not condition:
        raise error(message)
