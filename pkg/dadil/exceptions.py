class DadilError(Exception):
    """Base class for errors raised by dadil."""


class InvalidInputError(DadilError, ValueError):
    """Exception raised for empty, non-finite or out-of-range inputs."""


class DimensionMismatchError(InvalidInputError):
    """Exception raised when two arrays that must agree in shape do not."""


class InfeasiblePlanError(DadilError):
    """Exception raised when a solved transport plan violates its marginal constraints."""


class NonFiniteError(DadilError, FloatingPointError):
    """Exception raised when a loss or gradient becomes NaN or infinite during training."""

    def __init__(self, message, batch_indices=None):
        super().__init__(message)
        self.batch_indices = batch_indices


class FeatureFileError(DadilError):
    """Exception raised when a feature CSV file cannot be parsed."""


class ConfigError(DadilError, ValueError):
    """Exception raised for invalid configuration values."""
