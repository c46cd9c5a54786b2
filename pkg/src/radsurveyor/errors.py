"""Exception hierarchy shared by all pipeline modules.

Every error raised on purpose derives from RadSurveyError so callers
(CLI, HTTP service) can map them to stable error codes.
"""


class RadSurveyError(Exception):
    """Base class for all deliberate pipeline errors."""

    code = "error"


class ExtentError(RadSurveyError):
    """A query or trajectory left the valid spatial extent."""

    code = "extent"


class GeometryError(RadSurveyError):
    """Degenerate or invalid geometric input."""

    code = "geometry"


class ConfigError(RadSurveyError):
    """A configuration value violates a module precondition."""

    code = "config"


class DomainError(RadSurveyError):
    """A numeric input lies outside the model's domain."""

    code = "domain"


class DataError(RadSurveyError):
    """Measurement data is missing required fields."""

    code = "data"


class UnreachableError(RadSurveyError):
    """No collision-free path exists between the requested endpoints."""

    code = "unreachable"


class RankDeficiencyError(RadSurveyError):
    """The normal equations became singular during refinement."""

    code = "rank_deficient"

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class NumericError(RadSurveyError):
    """A non-finite value appeared where the model requires finite ones."""

    code = "numeric"


class EstimationError(RadSurveyError):
    """Input data lacks the information content the estimator needs."""

    code = "estimation"


class SequencingError(RadSurveyError):
    """A pipeline stage was requested before its prerequisite completed."""

    code = "sequencing"


class PendingInputError(RadSurveyError):
    """A gated stage is waiting for an operator input.

    Not a failure: the caller is expected to supply the named input and
    retry.
    """

    code = "pending_input"

    def __init__(self, message, missing=None):
        super().__init__(message)
        self.missing = missing or []


class StaleArtifactError(RadSurveyError):
    """A prerequisite artifact was produced under a different configuration."""

    code = "stale_config"


class VersionConflictError(RadSurveyError):
    """An optimistic-concurrency version check failed."""

    code = "version_conflict"
