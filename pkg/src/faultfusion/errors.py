"""Exception types shared across the package."""


class FaultFusionError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FaultFusionError):
    """Bad configuration or usage: invalid option values, missing arguments."""


class DataError(FaultFusionError):
    """Bad input data: unparseable files, inconsistent manifests, modality mismatch."""


class ShapeError(FaultFusionError):
    """Array shapes do not compose."""


class NumericError(FaultFusionError):
    """Non-finite values where finite ones are required (diverged training, NaN input)."""


class NotFittedError(FaultFusionError, AttributeError):
    """Estimator method needing a fitted model was called before fit()."""
