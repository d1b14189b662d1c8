"""Exception types raised across the package.

All of them derive from ``ValueError`` so callers that only care about bad
input can catch that.
"""


class InvalidInputError(ValueError):
    """Numeric input is malformed (wrong shape, non-finite, asymmetric...)."""


class UndefinedSimilarityError(ValueError):
    """Cosine similarity requested for a zero vector."""


class InvalidSpecError(ValueError):
    """Dataset parameters are out of range."""


class AmbiguousProjectionError(ValueError):
    """A point sits at an arc's circle center, so its projection is not unique."""


class InvalidScheduleError(ValueError):
    """Noise schedule parameters violate their bounds."""


class InvalidStepError(ValueError):
    """Timestep index outside the range an operation accepts."""


class ConfigError(ValueError):
    """Run configuration could not be parsed or validated."""


class MissingConfigFileError(ConfigError, FileNotFoundError):
    """The config path passed on the command line does not exist."""
