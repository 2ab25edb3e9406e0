"""Exception types shared across the package."""


class ProsonaError(Exception):
    """Base class for package errors."""


class ValidationError(ProsonaError, ValueError):
    """Malformed or out-of-contract input (shapes, ranges, dtypes)."""


class FormatError(ProsonaError, ValueError):
    """On-disk artifact violates the dataset/checkpoint format."""


class ConfigurationError(ProsonaError, ValueError):
    """Inconsistent or incomplete run configuration."""


class StateError(ProsonaError, RuntimeError):
    """Operation requires state (checkpoint, model) that is not loaded."""


class DegenerateGeometryError(ProsonaError, RuntimeError):
    """Synthetic geometry collapsed (empty mask / empty rater intersection)."""


class TrainingDivergenceError(ProsonaError, RuntimeError):
    """Loss became non-finite; aborted with diagnostics instead of clipping."""
