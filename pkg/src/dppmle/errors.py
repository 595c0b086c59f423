"""Exception taxonomy shared across the package.

Every raisable condition gets its own class so callers can react to a
specific failure (skip a grid point, fall back to an uncorrected
objective, abort a replicate) without string matching.
"""


class DppError(Exception):
    """Base class for all package-specific errors."""


class ExistenceViolated(DppError):
    """Requested parameters leave the valid existence region (spectral
    density would exceed 1 somewhere)."""


class SaturatedSpectrum(DppError):
    """Spectral density reaches or exceeds 1 on a set that makes a
    required integral or determinant diverge."""


class QuadratureFailure(DppError):
    """A numerical integral did not stabilise to the requested accuracy."""


class WindowNotRect(DppError):
    """Operation requires a plain rectangle window but got a composite."""


class PointOutsideWindow(DppError):
    """A point pattern contains a point outside its declared window."""


class EmptyInteriorPool(DppError):
    """Edge correction found no interior points (or no interior pair
    distances) to resample from."""


class NoFiniteObjective(DppError):
    """Every candidate parameter value produced an undefined objective."""


class DegeneratePattern(DppError):
    """Pattern has too few points for the requested operation."""


class SingularL0Matrix(DppError):
    """The likelihood-kernel matrix is numerically singular where a
    nonzero determinant is required."""


class TruncationOverflow(DppError):
    """A truncated series or sum could not meet its error target within
    the allowed number of terms."""


class RejectionStall(DppError):
    """Rejection sampling exceeded its proposal budget for one point."""


class EigenFailure(DppError):
    """Eigendecomposition of a finite kernel operator failed to converge."""


class SpectrumAtOne(DppError):
    """A finite kernel operator has an eigenvalue at or above 1, so the
    interaction operator L = K(I-K)^{-1} does not exist."""
