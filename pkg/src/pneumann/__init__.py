"""p-capacities, parabolicity tests and the p-Laplace Neumann problem on
discretized manifolds.

Subpackages by task:

* :mod:`pneumann.geometry`: metric meshes, radial models, generators, exhaustions
* :mod:`pneumann.energy`: the energy ``J``, its gradient, the minimizer
* :mod:`pneumann.capacity`: ``cap_p`` and the parabolic/hyperbolic classifier
* :mod:`pneumann.diagnostics`: dual norms, compatibility, solvability verdicts
* :mod:`pneumann.covers`: dyadic covers, partitions of unity, cover conditions
"""

from .errors import (
    InvalidParameterError,
    MeshError,
    PNeumannError,
    SingularityError,
    SizeMismatchError,
    SolverError,
)
from .geometry import (
    DATA,
    FREE,
    OUTER,
    ExhaustionSpec,
    MetricMesh,
    RadialModel,
    build_annulus_mesh,
    build_cusp_mesh,
    build_exhaustion,
    build_radial_model,
    load_domain,
    refine,
    refine_radial,
)
from .energy import (
    DataSpec,
    FunctionalData,
    SolveReport,
    SolverConfig,
    boundary_density,
    cell_density,
    compatibility,
    minimize_J,
    weak_residual,
)
from .capacity import CapacityProblem, cap_p, classify, radial_exhaustion
from .diagnostics import dual_norm, solvability_verdict, theorem31_series
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BACKEND",
    "DATA",
    "FREE",
    "OUTER",
    "CapacityProblem",
    "DataSpec",
    "ExhaustionSpec",
    "FunctionalData",
    "InvalidParameterError",
    "MeshError",
    "MetricMesh",
    "PNeumannError",
    "RadialModel",
    "SingularityError",
    "SizeMismatchError",
    "SolveReport",
    "SolverConfig",
    "SolverError",
    "boundary_density",
    "build_annulus_mesh",
    "build_cusp_mesh",
    "build_exhaustion",
    "build_radial_model",
    "cap_p",
    "cell_density",
    "classify",
    "compatibility",
    "dual_norm",
    "load_domain",
    "minimize_J",
    "radial_exhaustion",
    "refine",
    "refine_radial",
    "solvability_verdict",
    "theorem31_series",
    "weak_residual",
]
