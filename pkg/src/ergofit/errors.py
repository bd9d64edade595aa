"""Exception hierarchy shared across ergofit modules."""


class ErgofitError(Exception):
    """Base class for every error raised on purpose by this package."""


class InvalidParameterError(ErgofitError, ValueError):
    """A family constructor received parameters outside its admissible range."""


class InvalidArgumentError(ErgofitError, ValueError):
    pass


class DomainError(ErgofitError, ValueError):
    """A parameter or state lies outside the family's declared domain."""


class PreconditionError(ErgofitError, ValueError):
    pass


class PrecisionError(ErgofitError, ArithmeticError):
    """Requested computation exceeds what double precision can certify."""


class DataStarvationError(ErgofitError, ValueError):
    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class ResourceBudgetError(ErgofitError, RuntimeError):
    pass


class InfeasibleLPError(ErgofitError, RuntimeError):
    """Raised when a coupling LP has no feasible point (an internal invariant violation)."""


class ConfigError(ErgofitError, ValueError):
    def __init__(self, message, path=()):
        super().__init__(message)
        self.path = tuple(path)
