"""Exception hierarchy shared by all modules."""


class SpectralDecayError(Exception):
    """Base class for every error raised by this package."""


class ComputeError(SpectralDecayError):
    """A numerical operation could not produce a trustworthy result."""


class NonFinite(ComputeError, ValueError):
    pass


class Defective(ComputeError):
    """The matrix has no complete set of eigenvectors."""


class DegenerateSpectrum(ComputeError):
    pass


class ParallelStates(ComputeError):
    pass


class NotNormalized(ComputeError, ValueError):
    pass


class IndexOutOfRange(ComputeError, IndexError):
    pass


class PolesTooClose(ComputeError):
    """Two pole locations must be merged before computing residues."""


class ContourError(ComputeError):
    pass


class PoleOnContour(ContourError):
    pass


class PoleOutsideContour(ContourError):
    pass


class SingularSolve(ComputeError):
    pass


class StepCountTooSmall(ComputeError, ValueError):
    pass


class GridTooCoarse(ComputeError):
    pass


class WrongPathMethod(ComputeError):
    """A path integrated by one method was handed to a check for another."""


class ZeroCommutator(ComputeError):
    pass


class SingularTransform(ComputeError):
    pass


class DivergentSeriesWarning(RuntimeWarning):
    """The geometric resolvent series is not certified to converge.

    The result is still returned; this only flags it.
    """
