"""Exception types shared across the package."""


class QuantprocError(Exception):
    """Base class for all package errors."""


class ParameterError(QuantprocError):
    """A model parameter violates its admissible range."""


class SimulationError(QuantprocError):
    """Path generation failed (non-finite inputs, bad intensity bounds, ...)."""


class NumericError(QuantprocError):
    """A numerical routine failed to reach its tolerance.

    Carries the achieved error estimate when one is available.
    """

    def __init__(self, message: str, achieved: float | None = None):
        if achieved is not None:
            message = f"{message} (achieved error estimate {achieved:.3e})"
        super().__init__(message)
        self.achieved = achieved


class CapabilityError(QuantprocError):
    """The requested operation is not supported for this family."""


class RequestError(QuantprocError):
    """A valuation request is incomplete or inconsistent."""


class MappingError(QuantprocError):
    """The point-process mapping is not invertible at an event."""


class ConfigError(QuantprocError):
    """A declarative experiment configuration failed validation."""
