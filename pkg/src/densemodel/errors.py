"""Exception types raised across the package."""


class DenseModelError(Exception):
    """Base class for all package errors."""


class InvalidParameter(DenseModelError, ValueError):
    pass


class UniverseMismatch(DenseModelError, ValueError):
    pass


class DominationViolated(DenseModelError):
    """g <= nu fails pointwise beyond tolerance."""


class EmptySet(DenseModelError, ValueError):
    pass


class MeanMismatch(DenseModelError):
    pass


class NoCertificate(DenseModelError):
    """The equilibrium solver ran out of rounds before certifying its bracket.

    The partial :class:`~densemodel.game.GameResult` is available as ``.partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NoThreshold(DenseModelError):
    pass


class SupportViolation(DenseModelError):
    pass


class ChainViolation(DenseModelError):
    """A link of the distinguishing chain failed when recomputed."""


class DegreeCapExceeded(DenseModelError):
    pass


class SandwichViolation(DenseModelError):
    pass


class TermSelectionFailed(DenseModelError):
    pass


class Unresolved(DenseModelError):
    pass


class BudgetExceeded(DenseModelError):
    pass


class SchemaError(DenseModelError, ValueError):
    """Malformed instance or report file; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
