"""Exception types shared across the package."""


class LapfovError(Exception):
    """Base class for all package errors."""


class NonPositiveDepth(LapfovError):
    pass


class DepthOutOfRange(LapfovError):
    pass


class CameraFacingAway(LapfovError):
    pass


class EmptyMask(LapfovError):
    pass


class DisparityOutOfRange(LapfovError):
    pass


class DimensionMismatch(LapfovError):
    pass


class NoValidPixels(LapfovError):
    pass


class SequenceTooShort(LapfovError):
    pass


class DegenerateBaseline(LapfovError):
    pass


class TexturelessInput(LapfovError):
    pass


class EmptyInput(LapfovError):
    pass


class NonPositiveTruth(LapfovError):
    pass


class NoPointsInBounds(LapfovError):
    pass


class EmptyCandidateSet(LapfovError):
    pass


class DegenerateHomography(LapfovError):
    pass


class SingularAffine(LapfovError):
    pass


class ReflectionDetected(LapfovError):
    pass


class IllConditionedJacobian(LapfovError):
    """Raised or flagged when the 2D-task Jacobian loses rank."""


class ConfigError(LapfovError):
    """Bad scenario configuration (maps to CLI exit code 1)."""


class InvariantViolation(LapfovError):
    """Runtime invariant broken mid-run (maps to CLI exit code 2)."""


class PortUnavailable(LapfovError):
    pass
