"""Exception hierarchy shared by the numeric modules and the CLI."""


class EwaldError(Exception):
    """Base class for all package errors."""


class DomainError(EwaldError, ValueError):
    """Argument outside the mathematical domain of a function."""


class SingularityError(DomainError):
    """Kernel evaluated at zero separation."""


class ParameterError(EwaldError, ValueError):
    """Inconsistent or unusable method parameters."""


class DomainPadError(ParameterError):
    """A window or screening support leaves the padded free-space domain."""


class TuningError(ParameterError):
    """Requested tolerance cannot be met by the parameter tuner."""


class InputError(EwaldError, ValueError):
    """Malformed point input (CSV or arrays)."""


class OracleError(EwaldError, RuntimeError):
    """Reference quadrature failed to converge."""
