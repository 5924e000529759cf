"""Exception hierarchy shared by every reslab module."""


class ReslabError(Exception):
    """Base class for all errors raised by reslab."""


class DimensionError(ReslabError, ValueError):
    pass


class DomainError(ReslabError, ValueError):
    """A parameter is outside the set where the operation is defined."""


class NumericsError(ReslabError, ArithmeticError):
    """A NaN/Inf appeared, or an evaluation hit a pole."""


class SingularJacobianError(NumericsError):
    pass


class ImplicitSolveError(NumericsError):
    """The implicit proximal update did not converge."""


class EigenError(NumericsError):
    pass


class NotAnEquilibriumError(ReslabError, ValueError):
    pass


class UnsupportedError(ReslabError, NotImplementedError):
    pass


class NotFoundError(ReslabError, KeyError):
    pass


class ConfigError(ReslabError, ValueError):
    """A run configuration failed validation."""


class ExpressionError(ReslabError, ValueError):
    """Malformed objective expression; ``offset`` is the 1-based column."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
