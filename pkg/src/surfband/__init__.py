"""Narrow-band solver for conservation laws on implicit curves and surfaces.

Surface transport equations are embedded into a thin Cartesian band
around the zero level set and solved there with standard grid schemes;
a push-forward of the surface flux makes the band solution constant
along normals, so restriction back to the surface needs no special
treatment near the band edges.
"""

from .analysis import (
    SurfaceMesh,
    convergence_rate,
    curve_mesh,
    equator_mesh,
    error_norms,
    interpolate_to_surface,
    normal_variation,
    sphere_mesh,
    torus_mesh,
    total_mass,
)
from .errors import (
    BlowUpError,
    CurvatureBoundError,
    NonConvergenceError,
    ProjectionError,
    SingularOperatorError,
    SolverError,
    StencilError,
    TubeConfigError,
)
from .geometry import (
    Circle,
    Ellipse,
    LevelSetField,
    Sphere,
    Star,
    Torus,
    sample_level_set,
    tube_geometry,
)
from .grid import GridSpec
from .problems import (
    ProblemSpec,
    Reference1D,
    advection_oracle,
    burgers_oracle_circle,
    extend_initial,
    make_problem,
    problem_ids,
    reference_1d_periodic,
)
from .pushforward import PushForwardField, build_pushforward, pushforward_matrix
from .schemes import (
    GridField,
    RunResult,
    RunSetup,
    SchemeConfig,
    cfl_dt,
    extension_sweep,
    prepare_run,
    run,
    tvdrk3_step,
)
from .tube import EXTERIOR, INNER, OUTER, TubeGrid, build_tube, stencil_ok

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "Circle",
    "CurvatureBoundError",
    "Ellipse",
    "EXTERIOR",
    "GridField",
    "GridSpec",
    "INNER",
    "LevelSetField",
    "NonConvergenceError",
    "OUTER",
    "ProblemSpec",
    "ProjectionError",
    "PushForwardField",
    "Reference1D",
    "RunResult",
    "RunSetup",
    "SchemeConfig",
    "SingularOperatorError",
    "SolverError",
    "Sphere",
    "Star",
    "StencilError",
    "SurfaceMesh",
    "Torus",
    "TubeConfigError",
    "TubeGrid",
    "advection_oracle",
    "build_pushforward",
    "build_tube",
    "burgers_oracle_circle",
    "cfl_dt",
    "convergence_rate",
    "curve_mesh",
    "equator_mesh",
    "error_norms",
    "extend_initial",
    "extension_sweep",
    "interpolate_to_surface",
    "make_problem",
    "normal_variation",
    "prepare_run",
    "problem_ids",
    "pushforward_matrix",
    "reference_1d_periodic",
    "run",
    "sample_level_set",
    "sphere_mesh",
    "stencil_ok",
    "torus_mesh",
    "total_mass",
    "tube_geometry",
    "tvdrk3_step",
]
