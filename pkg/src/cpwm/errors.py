"""Exception and warning types raised across the package."""


class TurningPointError(ValueError):
    """Classical momentum is undefined: E <= V(x) somewhere it is needed."""


class EnergyBelowThresholdError(ValueError):
    """No open product channel: E <= V(+inf)."""


class NoOpenChannelError(EnergyBelowThresholdError):
    """Raised by the time-independent solver when transmission is closed."""


class InsufficientPointsError(ValueError):
    """Fewer samples than a five-point stencil needs."""


class ExtrapolationWarning(UserWarning):
    """An interpolation query fell outside the hull of its samples."""


class CFLInstabilityError(FloatingPointError):
    """Fixed-grid propagation diverged (field max-norm exceeded its bound)."""


class ConfigError(ValueError):
    """Malformed run configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class IncompatibleSchemeError(ConfigError):
    """Scheme cannot be applied to the requested potential/energy."""


class NotConvergedError(RuntimeError):
    """t_max reached before the stopping rule was met.

    The partial :class:`~cpwm.observables.ScatteringResult` is attached as
    ``result`` so callers can still inspect it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
