"""Exception types raised across the toolkit."""


class CoprimeDoaError(Exception):
    """Base class for all toolkit errors."""


class NonCoprime(CoprimeDoaError):
    """M and N share a common factor greater than one."""


class BadOrder(CoprimeDoaError):
    """M must be strictly smaller than N."""


class OutOfRangeAngle(CoprimeDoaError):
    """Angle outside the supported [-90, 90] degree range."""


class EmptySnapshots(CoprimeDoaError):
    """Covariance estimation requires at least one snapshot."""


class MissingLag(CoprimeDoaError):
    """A lag in [-MN, MN] has no contributing sensor pair."""


class ShapeMismatch(CoprimeDoaError):
    """Operand shapes are incompatible."""


class DegenerateConstant(CoprimeDoaError):
    """Min-max normalization of an all-constant vector."""


class LengthMismatch(CoprimeDoaError):
    """Vectors that must have equal length do not."""


class NonPositiveScale(CoprimeDoaError):
    """Gaussian scale parameters must be strictly positive."""


class NegativeKL(CoprimeDoaError):
    """A negative KL total signals an upstream bug."""


class StaleCache(CoprimeDoaError):
    """backward() called without a matching forward() cache."""


class DivergedLoss(CoprimeDoaError):
    """Training loss became non-finite."""


class EmptyDataset(CoprimeDoaError):
    """Operation requires a non-empty dataset."""


class OffGridOutOfRange(CoprimeDoaError):
    """DOA falls outside the label grid."""


class DuplicateBin(CoprimeDoaError):
    """Two DOAs map to the same grid bin."""


class KTooLarge(CoprimeDoaError):
    """Requested more peaks than grid bins."""


class SeparationOffGrid(CoprimeDoaError):
    """Angular separation is not a multiple of the grid step."""


class SchemaViolation(CoprimeDoaError):
    """Dataset file does not match the expected record schema."""
