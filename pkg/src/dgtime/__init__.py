"""hp discontinuous Galerkin time stepping for damped second-order hyperbolic problems."""

from dgtime.legendre import (
    QuadratureRule,
    SlabBasis,
    eval_legendre,
    gauss_rule,
    slab_basis_eval,
)
from dgtime.projection import (
    LegendreSeries,
    ProjectedPoly,
    project_p,
    project_pi,
    rescale,
)
from dgtime.fem import (
    SemiDiscreteSystem,
    SpatialMesh,
    assemble_1d,
    assemble_2d_elasticity,
    assemble_load,
    interpolate,
    ritz_project,
)
from dgtime.problems import ProblemSpec, get_problem
from dgtime.slab import (
    SlabSolution,
    SlabSystem,
    TimeMesh,
    TrajectoryState,
    advance,
    assemble_slab,
    build_time_matrices,
    solve_slab,
)
from dgtime.errors import (
    ConvergenceReport,
    EnergyErrorBreakdown,
    energy_error,
    l2_endpoint_error,
    rates,
)

__version__ = "0.1.0"
