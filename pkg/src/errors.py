"""
Exception hierarchy for the kinetic laboratory.

Services raise these; the CLI maps them onto exit codes.
"""


class KineticsError(Exception):
    """Base class for every error raised by the laboratory."""


class DimensionError(KineticsError, ValueError):
    """Operand shapes, particle counts or labels do not fit together."""


class SymmetryError(KineticsError, ValueError):
    """An operator required to be Hermitian (or symmetric) is not."""


class CapacityError(KineticsError):
    """A desk-scale cap (matrix rows, enumeration size, series order) is exceeded."""


class ConfigError(KineticsError, ValueError):
    """A run configuration or request is inconsistent."""


class NormalizationError(KineticsError, ValueError):
    """A wave function is not normalized."""


class InsufficientDataError(KineticsError):
    """Too few usable sweep records for a rate fit."""
