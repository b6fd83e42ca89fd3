"""Exception taxonomy shared across the toolkit."""


class FuchsiaError(Exception):
    """Base class for domain errors."""


class EvaluationAtPole(FuchsiaError):
    pass


class FoldPreconditionViolated(FuchsiaError):
    pass


class ChosenPointReal(FuchsiaError):
    pass


class PointsNotReal(FuchsiaError):
    pass


class SinglePoint(FuchsiaError):
    pass


class DimensionMismatch(FuchsiaError):
    pass


class ChainLimitExceeded(FuchsiaError):
    pass


class NoSyzygyAtDegree(FuchsiaError):
    pass


class SegmentTooClose(FuchsiaError):
    pass


class NoAdmissibleC(FuchsiaError):
    pass


class SpectrumNotReal(FuchsiaError):
    pass


class PathHitsSingularity(FuchsiaError):
    pass


class StepFloorReached(FuchsiaError):
    pass


class ResolutionExceeded(FuchsiaError):
    pass


class BoundaryZeroUnresolved(FuchsiaError):
    pass


class ZeroArgument(FuchsiaError):
    pass


class SegmentNotReal(FuchsiaError):
    pass


class SegmentMeetsSigma(FuchsiaError):
    pass


class ResamplingUnstable(FuchsiaError):
    pass


class NotCloseEnough(FuchsiaError):
    pass


class NoConvergence(FuchsiaError):
    pass


class AccuracyUnreachable(FuchsiaError):
    pass


class NotAZero(FuchsiaError):
    pass


class SpectralSlitFailure(FuchsiaError):
    pass


class SeparationViolated(FuchsiaError):
    pass


class BoundTooLarge(FuchsiaError):
    pass
