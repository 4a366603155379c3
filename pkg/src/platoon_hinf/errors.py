"""Exception types shared across the package."""


class PlatoonHinfError(Exception):
    """Base class for all package errors."""


class DomainError(PlatoonHinfError, ValueError):
    """Mixing continuous and discrete systems, bad sampling periods, zero denominators."""


class DelayAdditionError(DomainError):
    """An operation needs a rational system but got an unexpanded pure delay."""


class FrequencyRangeError(DomainError):
    """Discrete-time evaluation at or above the Nyquist frequency."""


class ConfigError(PlatoonHinfError, ValueError):
    """Invalid configuration values or files."""


class DivergenceError(PlatoonHinfError, RuntimeError):
    """Raised when a simulated state blows up.

    ``trace`` holds the partial trace up to (and including) the offending step.
    """

    def __init__(self, vehicle, t, trace=None):
        super().__init__(f"simulation diverged: vehicle {vehicle} at t={t:.6g} s")
        self.vehicle = vehicle
        self.t = t
        self.trace = trace


class SynthesisFailure(PlatoonHinfError, RuntimeError):
    """No restart produced a stabilizing controller.

    ``best`` carries the best (infeasible, unstable) record found.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
