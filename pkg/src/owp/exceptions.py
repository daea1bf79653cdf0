"""Exception hierarchy for the ``owp`` package."""


class OWPError(Exception):
    """Base class for all package errors."""


class DimensionError(OWPError, ValueError):
    """Array shapes or lengths are inconsistent."""


class DomainError(OWPError, ValueError):
    """An input value lies outside the mathematical domain of an operation."""


class ConfigurationError(OWPError, ValueError):
    """Unknown preset, bad parameter combination or infeasible budget."""


class UnsupportedModeError(OWPError, ValueError):
    """The requested operation is not available for this input regime."""


class ResourceError(OWPError, RuntimeError):
    """A guard on computational size was exceeded."""


class InstanceFormatError(OWPError, ValueError):
    """An instance or parameter file is malformed or fails validation."""


class ReportError(OWPError, ValueError):
    """Benchmark results cannot be summarised as requested."""
