"""Exception hierarchy.

Each family maps onto one CLI exit code (see ``textcausal.cli``).
"""


class TextCausalError(Exception):
    """Base class for every error raised by this package."""


# -- configuration (exit 2) -------------------------------------------------

class ConfigError(TextCausalError, ValueError):
    """Bad configuration value; ``path`` names the offending field."""

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ParameterError(ConfigError):
    """An operation was called with an out-of-range parameter."""


# -- data (exit 3) ----------------------------------------------------------

class DataError(TextCausalError, ValueError):
    """Problem with an input dataset."""


class SchemaError(DataError):
    """A column named by the schema is missing."""


class ValidationError(DataError):
    """A row violates the dataset contract."""

    def __init__(self, message, row=None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class EmptyDatasetError(DataError):
    pass


class ShapeError(DataError):
    """Array widths or lengths disagree."""


class ComparisonError(DataError):
    """Two result sets cannot be compared (different units or groups)."""


# -- training / numerics (exit 4) -------------------------------------------

class TrainingError(TextCausalError):
    """A learner or estimator failed."""


class NumericError(TrainingError, ArithmeticError):
    pass


class SingularityError(NumericError):
    pass


class NormalizationError(TrainingError):
    pass


class ProviderError(TrainingError):
    """Embedding provider failure. ``batch_index`` locates the failing request."""

    def __init__(self, message, batch_index=None):
        self.batch_index = batch_index
        prefix = f"batch {batch_index}: " if batch_index is not None else ""
        super().__init__(prefix + message)


class ProviderShapeError(ProviderError, ShapeError):
    """The provider answered with embeddings of the wrong shape."""


class EstimationError(TrainingError):
    pass


class DegenerateBLPError(EstimationError):
    pass


class UndefinedCorrelationError(EstimationError):
    pass


class UndefinedRatioError(EstimationError):
    pass


class OrchestrationError(TrainingError):
    pass


class CoverageError(OrchestrationError):
    pass


# -- internal (exit 5) ------------------------------------------------------

class InvariantError(TextCausalError, AssertionError):
    """An internal invariant was violated; indicates a bug."""
