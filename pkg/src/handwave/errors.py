"""Exception hierarchy shared across the package."""


class HandwaveError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(HandwaveError, ValueError):
    """Malformed input: dimension mismatch, empty sequence, indivisible shape."""


class ConfigError(HandwaveError, ValueError):
    """Inconsistent configuration, e.g. a compressed vector fed to a
    template bank built from a different projection seed."""


class NumericalError(HandwaveError, RuntimeError):
    """A numerical routine failed to converge within its iteration budget."""
