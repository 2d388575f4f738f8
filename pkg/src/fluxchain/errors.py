"""Exception types shared across the package."""


class FluxchainError(Exception):
    """Base class for all domain errors raised by fluxchain."""


class ConfigError(FluxchainError):
    """Device/schedule configuration could not be parsed or validated."""


class ModelError(FluxchainError):
    """A physical model was evaluated outside its validity domain."""


class FitError(FluxchainError):
    """A least-squares fit failed or the data cannot constrain it."""


class ConvergenceError(FluxchainError):
    """An iterative solver failed to converge."""


class CalibrationError(FluxchainError):
    """A calibration target cannot be reached by the model."""
