"""Exception hierarchy.

Every error raised on purpose by the package derives from ``BesselHoloError``.
The CLI maps ``UsageError`` subclasses to exit code 1 and ``NumericalError``
subclasses to exit code 2.
"""


class BesselHoloError(Exception):
    """Base class for all package errors."""


class UsageError(BesselHoloError):
    """Bad input supplied by the caller (configuration, files, arguments)."""


class NumericalError(BesselHoloError):
    """A computation cannot be carried out within its validity limits."""


class DomainError(UsageError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(UsageError, ValueError):
    """Invalid configuration.

    Carries every problem found, not only the first one.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class FormatError(UsageError):
    """Malformed or truncated file."""


class SamplingError(NumericalError):
    """Grid too coarse or too small for the requested quantity."""


class InfeasibleMaskError(NumericalError):
    """Requested phase needs more material than the membrane provides."""


class PropagationRangeError(NumericalError):
    """Propagation distance would wrap the field around the periodic grid."""

    def __init__(self, message, max_safe_dz=None):
        super().__init__(message)
        self.max_safe_dz = max_safe_dz


class ValidityRangeError(NumericalError):
    """Point lies outside the range where an approximation holds."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class OracleError(NumericalError):
    """Reference quadrature failed to converge."""


class AnalysisError(NumericalError):
    """Analysis not possible for this field or hologram (e.g. overlapping orders)."""
