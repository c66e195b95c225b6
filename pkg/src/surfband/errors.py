"""Exception types raised by the solver.

Every failure mode surfaces as a subclass of SolverError so the CLI can map
them to a nonzero exit code with a single message naming the failing stage.
"""


class SolverError(Exception):
    """Base class for all solver failures."""


class NonConvergenceError(SolverError):
    """An iterative routine (projection Newton, implicit oracle) failed to converge."""


class ProjectionError(SolverError):
    """A closest-point query lies beyond the reach of the surface."""


class CurvatureBoundError(SolverError):
    """The inner tube radius does not satisfy R < 1/max-curvature."""


class TubeConfigError(SolverError):
    """Tube construction produced an inconsistent band (missing neighbors, bad radii)."""


class StencilError(SolverError):
    """A finite-difference or interpolation stencil left the stored band."""


class SingularOperatorError(SolverError):
    """det(I - phi*H) is numerically zero where the push-forward matrix is needed."""


class BlowUpError(SolverError):
    """The evolved field stopped being finite."""
