"""Log-barrier smoothed MPC for constrained linear systems.

Condenses finite-horizon MPC problems into dense quadratic programs, solves
them exactly (active set) or with a recentered log-barrier (damped Newton),
exposes the explicit piecewise-affine policy and the analytic Jacobian of the
smoothed policy, and provides a randomized-smoothing baseline plus closed-loop
rollout utilities.
"""

from barriermpc import linalg_kernels
from barriermpc.barrier import (
    BarrierConfig,
    BarrierSolution,
    BoundsReport,
    OutsideDomainError,
    barrier_hessian_floor,
    barrier_objective,
    bounds_report,
    convex_combination_jacobian,
    hessian_norm_report,
    jacobian_norm_bound,
    policy,
    policy_jacobian,
    policy_jacobian_woodbury,
    recentering_vector,
    residual_lower_bound,
    sampled_c_constant,
    self_concordance_parameter,
    solve_barrier,
    suboptimality_report,
    subset_gain_table,
)
from barriermpc.condense import (
    CondensedQp,
    InfeasibleError,
    LinearSystem,
    MpcSpec,
    Polytope,
    QpGeometry,
    box,
    build_prediction_matrices,
    chebyshev_center,
    condense,
    double_integrator,
    geometry,
    load_problem,
    residuals,
    simulate,
)
from barriermpc.explicit import (
    AffinePiece,
    CyclingGuardError,
    DegenerateActiveSetError,
    PieceCache,
    PieceCensus,
    QpSolution,
    enumerate_pieces,
    eval_explicit,
    eval_explicit_batch,
    piece_gains,
    sigma_from_key,
    sigma_key,
    solve_qp,
)
from barriermpc.rollout import (
    BarrierPolicy,
    ExplicitPolicy,
    PolicyFailure,
    RandomizedSmoothingPolicy,
    SmoothnessEstimate,
    Trajectory,
    barrier_family,
    closed_loop,
    export_dataset,
    iss_estimate,
    load_dataset,
    randomized_family,
    sample_initial_states,
    smoothness_sweep,
    sweep_to_csv,
)
from barriermpc.smoothing import (
    SmoothingSpec,
    projection_qp,
    project_feasible,
    randomized_policy,
    smoothed_jacobian,
)

__all__ = [
    "AffinePiece",
    "BarrierConfig",
    "BarrierPolicy",
    "BarrierSolution",
    "BoundsReport",
    "CondensedQp",
    "CyclingGuardError",
    "DegenerateActiveSetError",
    "ExplicitPolicy",
    "InfeasibleError",
    "LinearSystem",
    "MpcSpec",
    "OutsideDomainError",
    "PieceCache",
    "PieceCensus",
    "PolicyFailure",
    "Polytope",
    "QpGeometry",
    "QpSolution",
    "RandomizedSmoothingPolicy",
    "SmoothingSpec",
    "SmoothnessEstimate",
    "Trajectory",
    "barrier_family",
    "barrier_hessian_floor",
    "barrier_objective",
    "bounds_report",
    "box",
    "build_prediction_matrices",
    "chebyshev_center",
    "closed_loop",
    "condense",
    "convex_combination_jacobian",
    "double_integrator",
    "enumerate_pieces",
    "eval_explicit",
    "eval_explicit_batch",
    "export_dataset",
    "geometry",
    "hessian_norm_report",
    "iss_estimate",
    "jacobian_norm_bound",
    "linalg_kernels",
    "load_dataset",
    "load_problem",
    "piece_gains",
    "policy",
    "policy_jacobian",
    "policy_jacobian_woodbury",
    "project_feasible",
    "projection_qp",
    "randomized_family",
    "randomized_policy",
    "recentering_vector",
    "residual_lower_bound",
    "residuals",
    "sample_initial_states",
    "sampled_c_constant",
    "self_concordance_parameter",
    "sigma_from_key",
    "sigma_key",
    "simulate",
    "smoothed_jacobian",
    "smoothness_sweep",
    "solve_barrier",
    "solve_qp",
    "suboptimality_report",
    "subset_gain_table",
    "sweep_to_csv",
]
