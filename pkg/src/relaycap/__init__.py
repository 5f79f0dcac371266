"""Cut-set capacity bounds and power allocation for relay networks.

Cut capacities of Gaussian, ADT deterministic and wireless erasure networks
are submodular, so the minimum cut is found by submodular minimization
(Fujishige-Wolfe minimum-norm point) instead of enumerating subsets. On top
of that sit a log-barrier solver and cutting-plane loops for power
minimization, rate maximization and network simplification.
"""
from .errors import ConvergenceError, DomainError, NumericalError, RelayCapError
from .kernels import BACKEND
from .netmodel import (
    ADTNetwork,
    CorrelatedDiamond,
    Cut,
    ErasureNetwork,
    GaussianNetwork,
    adt_cut_value,
    correlated_gaussian_mi,
    cut_value,
    erasure_cut_value,
    erasure_mi_oracle,
    gaussian_cut_gradient,
    gaussian_cut_value,
    gfp_rank,
    nonsubmodularity_gap,
    random_adt_network,
    random_erasure_network,
    random_gaussian_network,
    rng_for,
)
from .sfm import brute_force_min, lovasz_extension, min_cut, min_norm_point, normalize_cut_function
from .cvx import BarrierConfig, InnerProblem, infeasibility, separating_direction, solve_inner
from .powopt import (
    general_program,
    grid_oracle,
    maximize_rate,
    minimize_power,
    simplify_network,
)
from .netio import load_network, save_network

__version__ = "0.1.0"
