"""Exceptions and warnings raised by the library."""


class BCDError(Exception):
    """Base class for numerical failures of the library."""


class SingularKPoint(BCDError):
    """``z - H(kappa)`` is numerically singular at some quadrature node."""


class NoConvergence(BCDError):
    """An iterative solver hit its iteration cap."""


class DivergedOutsideWindow(BCDError):
    """Newton left the trust region around its starting point."""


class DegenerateResonance(BCDError):
    """The kernel of ``1 - V R0(z0)`` is not one-dimensional."""


class PatternMismatch(BCDError, ValueError):
    """The defect does not have the shape required by the routine."""


class BranchPoint(BCDError, ValueError):
    """Evaluation requested at the branch point z = 0 of the free kernel."""


class DegenerateBands(UserWarning):
    """Two bands are closer than the degeneracy tolerance."""


class VanHoveProximity(UserWarning):
    """The deformation window contains a van Hove point."""


class DeformationTooStrong(UserWarning):
    """The Jacobian of the complex change of variables nearly vanishes."""
