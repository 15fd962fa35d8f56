"""Exception hierarchy shared by all fitzflow modules."""


class FitzflowError(Exception):
    """Base class for library errors."""


class DimensionError(FitzflowError, ValueError):
    """Argument shape does not match the object's dimension."""


class ImproperFunctionError(FitzflowError, ValueError):
    """A convex function (or operator graph) is +inf (or empty) everywhere."""


class NonConvexError(FitzflowError, ValueError):
    """Input data fails a convexity or monotonicity check."""


class NotMaximalError(FitzflowError):
    """The operation needs a maximal monotone operator."""


class ConvergenceError(FitzflowError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class OutsideDomainError(FitzflowError, ValueError):
    """Point lies where the function is +inf."""


class ConfigError(FitzflowError, ValueError):
    """Invalid experiment configuration. ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
