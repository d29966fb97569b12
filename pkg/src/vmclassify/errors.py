"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An operand's shape is incompatible with the operation."""


class DegenerateBatchError(ValueError):
    """Batch statistics cannot be computed (a single value per channel)."""


class MissingGradientError(RuntimeError):
    """An optimizer step was requested for a parameter without a gradient."""


class GradientStateError(RuntimeError):
    """Gradients were not reset between consecutive backward passes."""


class WeightFormatError(ValueError):
    """A weight container file is corrupt or incompatible."""


class DataError(ValueError):
    """Trace ingestion or dataset preparation failed."""


class ConfigError(ValueError):
    """A configuration value is out of range or inconsistent."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""
