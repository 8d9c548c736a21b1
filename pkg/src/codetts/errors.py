"""Exception types shared across the pipeline."""


class CodettsError(Exception):
    """Base class for all errors raised by this package."""


class IngestionError(CodettsError):
    """Audio file could not be read or decoded."""


class EmptyInputError(CodettsError):
    """Operation received zero-length input where content is required."""


class ConfigurationError(CodettsError):
    """Mismatched dimensions, invalid sizes, or inconsistent settings."""


class DataError(CodettsError):
    """Token or record outside the valid range/schema."""


class NumericalError(CodettsError):
    """Non-finite value encountered where finiteness is required."""


class ContextOverflowError(CodettsError):
    """Joint sequence longer than the model's configured context."""


class LossUndefinedError(CodettsError):
    """Loss has no defined value for this batch (e.g. no positive pair)."""


class UndefinedMetricError(CodettsError):
    """Metric undefined for this input (empty reference, zero vector, n<2)."""


class DataIntegrityError(CodettsError):
    """Shipped data file failed its checksum."""


class CompletenessError(CodettsError):
    """Ratings are missing entries; message lists the gaps."""


class DependencyError(CodettsError):
    """A pipeline stage was run before the stage it depends on."""


class LockError(CodettsError):
    """Another process holds the run directory's stage lock."""
