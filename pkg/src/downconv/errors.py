"""Exception and warning types raised by the simulator."""


class DownconvError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DownconvError, ValueError):
    """An input parameter is outside its valid domain."""


class DomainError(ParameterError):
    pass


class PoleProximityError(ParameterError):
    pass


class TruncationRiskError(ParameterError):
    pass


class DimensionError(ParameterError):
    pass


class NumericError(DownconvError, ArithmeticError):
    """A numerical routine failed or produced an unphysical result."""


class InstabilityError(NumericError):
    pass


class IllConditionedError(NumericError):
    pass


class InvariantError(NumericError):
    """An internal invariant was violated (indicates a bug or corrupt input)."""


class TruncationWarning(UserWarning):
    pass


class ValidityWarning(UserWarning):
    pass
