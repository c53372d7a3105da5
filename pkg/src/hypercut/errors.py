"""Exception types raised across the package.

Most derive from ValueError so callers using sklearn-style validation
conventions can catch them broadly; the distinct classes exist so tests
and pipelines can tell failure modes apart.
"""


class DimensionError(ValueError):
    """Operands have incompatible or unsupported dimensions."""


class NotOnManifoldError(ValueError):
    """Coordinates do not satisfy the hyperboloid constraint."""


class InvalidTangentError(ValueError):
    """Vector is not in the tangent space of its base point."""


class OutOfBallError(ValueError):
    """Poincare coordinates lie on or outside the unit ball."""


class OutOfModelError(ValueError):
    """Klein coordinates lie on or outside the unit ball."""


class EmptyAggregationError(ValueError):
    """Midpoint aggregation received no points or no usable weights."""


class InvalidFeatureError(ValueError):
    """Feature matrix contains non-finite entries or has a bad shape."""


class RetractionFailureError(ValueError):
    """QR retraction hit a rank-deficient argument."""


class DegenerateGraphError(ValueError):
    """Graph has a zero-degree node, so normalized-cut terms are undefined."""


class TooLargeError(ValueError):
    """Exhaustive enumeration refused: instance exceeds the size cap."""


class InsufficientForegroundError(ValueError):
    """Foreground region too small to re-cluster."""


class EmptyGridError(ValueError):
    """Label grid has no patches."""


class DivergedError(RuntimeError):
    """Training loss became non-finite; carries the epoch index."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"loss became non-finite at epoch {epoch}")


class NanGuardError(FloatingPointError):
    """A forward-pass stage produced non-finite values; carries the stage name."""

    def __init__(self, stage: str):
        self.stage = stage
        super().__init__(f"non-finite values produced at stage '{stage}'")


class FeatureFileError(ValueError):
    """Base class for feature-file parsing failures."""


class BadMagicError(FeatureFileError):
    """File does not start with the expected magic bytes."""


class BadVersionError(FeatureFileError):
    """Unsupported feature-file version."""


class LengthMismatchError(FeatureFileError):
    """File length does not match the header's implied payload size."""


class NonFinitePayloadError(FeatureFileError):
    """Feature payload contains NaN or infinite values."""
