"""Zeroth-order mirror descent for convex-concave saddle-point problems.

The solver (zoSPA) only queries noisy function values.  It builds two-point
gradient estimates along random unit directions, takes mirror steps in the
entropy or Euclidean setup, and returns the weighted average of its iterates.
"""

from .exceptions import (
    ConfigurationError,
    DomainError,
    InvalidInputError,
    ProbeInfeasibleError,
    ZospaError,
)
from .feasible_sets import (
    Box,
    DirectionSampler,
    LpBall,
    Product,
    ShrinkPlan,
    Simplex,
    contains,
    hyperplane_basis,
    resolve_shrink_plan,
    sample_direction,
)
from .geometry import (
    BlockPoint,
    Geometry,
    aq_squared,
    block_prox_step,
    bregman_divergence,
    default_geometry,
    lp_norm,
    make_geometry,
    prox_function,
    prox_step,
)
from .problems import (
    LagrangianQP,
    MatrixGame,
    MonkeySaddle,
    SeparableQuadratic,
    finite_difference_gradient,
    generate_section4_matrix,
    load_matrix_csv,
    matrix_game_value,
    resize_saddle,
    save_matrix_csv,
)
from .solvers import (
    RunRecord,
    SolverConfig,
    first_order_step,
    mirror_descent_run,
    run_chains,
    saddle_gap,
    theory_step,
    zospa_run,
)
from .zo_oracle import (
    EstimatorConfig,
    GaussianNoise,
    MultiplicativeNormal,
    MultiplicativeUniform,
    NoiseModel,
    OracleCounter,
    SaddleFunction,
    linear_saddle,
    noisy_value,
    resolve_tau_delta,
    sign_delta,
    sine_delta,
    smoothed_value,
    two_point_estimate,
)

__version__ = "0.1.0"
