"""Exception types raised across the reconstruction package."""


class ReconstructionError(Exception):
    """Base class for all package errors."""


class NearParallel(ReconstructionError):
    """Two rays (or two view axes) are too close to parallel to triangulate."""


class EmptyMask(ReconstructionError):
    pass


class AmbiguousTip(ReconstructionError):
    """A device skeleton has more than two end points."""


class IsolatedPixel(ReconstructionError):
    pass


class InsufficientPoints(ReconstructionError):
    pass


class DegenerateChain(ReconstructionError):
    """All input points coincide, so no parameterisation exists."""


class DomainError(ReconstructionError):
    pass


class SourceOnPlane(ReconstructionError):
    pass


class NewtonDivergence(ReconstructionError):
    pass


class JoinGapTooLarge(ReconstructionError):
    pass


class VanishingTangent(ReconstructionError):
    pass


class NoValidPairs(ReconstructionError):
    """Every entry of an error matrix is infinite."""


class OutOfField(ReconstructionError):
    """Too many phantom samples project outside the detector."""


class UnpairedChain(ReconstructionError):
    pass


class CalibrationError(ReconstructionError):
    pass
