"""Exception hierarchy shared across the toolkit."""


class AnemiaBenchError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(AnemiaBenchError):
    """Malformed schema, generator spec, or pipeline configuration."""


class InvalidMeasurementError(AnemiaBenchError):
    """Non-positive or non-finite physiological measurement."""


class MissingAnthropometryError(AnemiaBenchError):
    """No usable anthropometric z-scores for a record."""


class UnimputableColumnError(AnemiaBenchError):
    """Imputation requested on a column with no observed values."""


class SchemaViolationError(AnemiaBenchError):
    """A cell value is not a known level of its feature."""

    def __init__(self, message, row=None, feature=None):
        super().__init__(message)
        self.row = row
        self.feature = feature


class StratificationError(AnemiaBenchError):
    """A class is too small to honor the requested stratified split."""


class DegenerateTableError(AnemiaBenchError):
    """Contingency table with a zero row or column marginal."""


class InfeasibleNeighborsError(AnemiaBenchError):
    """Minority class too small for the requested SMOTE k."""


class DivergenceError(AnemiaBenchError):
    """Unregularized logistic fit diverged (perfect separation)."""


class SeparationError(AnemiaBenchError):
    """Multivariable logistic fit failed to converge; names the worst column."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class RankDeficiencyError(AnemiaBenchError):
    """Singular information matrix in a regression fit."""


class SingularScatterError(AnemiaBenchError):
    """Within-class scatter matrix singular with zero shrinkage."""


class DivergedTrainingError(AnemiaBenchError):
    """Neural-network training produced a non-finite loss."""


class UndefinedMetricError(AnemiaBenchError):
    """Metric undefined for the given inputs (single class, no positives...)."""


class SearchFailureError(AnemiaBenchError):
    """Every grid-search candidate failed."""


class PipelineStageError(AnemiaBenchError):
    """Wraps a failure inside a named pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
