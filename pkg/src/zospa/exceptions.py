"""Exception types shared across the package."""


class ZospaError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ZospaError, ValueError):
    """An argument has the wrong shape or contains non-finite entries."""


class DomainError(ZospaError, ValueError):
    """A function was evaluated outside the set where it is defined."""


class ConfigurationError(ZospaError, ValueError):
    """Incompatible or impossible combination of settings."""


class ProbeInfeasibleError(ZospaError, RuntimeError):
    """A two-point probe left the oracle domain.

    Raised only when the shrink/clearance preconditions were violated, which
    should be impossible for a correctly configured run.
    """
