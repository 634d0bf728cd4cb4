"""Effective crack energy of periodic voxel microstructures.

The minimal gamma-weighted cut through a periodic cell with prescribed
mean normal is computed from a node-based (combinatorial continuous)
maximum-flow discretization, solved by a damped ADMM whose projection
step is a diagonal operator in Fourier space.

>>> import numpy as np
>>> from fracflow import solve
>>> solve(np.ones((8, 8, 8)), [1, 0, 0]).gamma_eff
1.0
"""

__version__ = "0.1.0"

from .admm import (
    PENALTY_STRATEGIES,
    AdmmState,
    Diagnostics,
    SolveResult,
    SolverConfig,
    admm_iterate,
    convergence_residual,
    crack_energy,
    diagnostics,
    initial_state,
    penalty_next,
    project_ball,
    solve,
)
from .exceptions import (
    DivergenceError,
    FracflowError,
    JammingError,
    MissingPhaseError,
    NegativeResistanceError,
    NonFiniteFieldError,
    ShapeMismatchError,
    VoxelFormatError,
)
from .grid import GridDims, as_direction, inner_product, mean_field, norm, pointwise_norm
from .microstructure import (
    PhaseMap,
    gen_capsules,
    gen_homogeneous,
    gen_laminate,
    gen_sphere,
    gen_sphere_pack,
    phases_to_gamma,
)
from .operators import (
    constraint_violation,
    div_minus,
    extend_A,
    grad_plus,
    restrict_Astar,
    shift_back,
    shift_forward,
)
from .oracle import PdhgConfig, PdhgResult, pdhg_solve, planar_cut_bound
from .spectral import SpectralPlan, gamma_apply, project_compatible, project_compatible_linear
from .voxelio import load_phase_map, load_scalar_field, load_voxel, save_voxel, write_structured_points
