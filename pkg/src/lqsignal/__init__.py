"""Two-player zero-sum LQ games where the minimizer holds private type info.

The solver commits the informed player to a signaling policy over an I-ary
public branch tree, evaluates the induced value exactly by a tree-structured
Riccati recursion, and descends the committed value with hand-derived
policy gradients.  A dual module evaluates the uninformed player's
label-based recursions, and a simulation harness rolls out policies with
optional per-step re-solving.
"""

from .game import (
    ContinuousDynamics,
    DiscreteDynamics,
    GameSpec,
    TypeData,
    ValidationReport,
    discretize_dynamics,
    load_spec,
    save_spec,
    separable_structure_check,
    spec_sha256,
    tau_star,
    validate_game,
)
from .tree import (
    BeliefTree,
    NodeId,
    SignalingPolicy,
    belief_average,
    forward_bayes_pass,
    martingale_residual,
    softmax_rows,
)
from .riccati import (
    EdgeSolution,
    QuadraticValue,
    ValueTree,
    WellPosednessError,
    aggregate_node,
    backward_pass,
    complete_info_solve,
    evaluate_value,
    leaf_value,
    solve_edge,
)
from .backprop import grad_fd, grad_loss, loss, tree_loss, tree_loss_grad
from .optimize import (
    OptimizerConfig,
    SolvedPolicy,
    load_policy,
    optimize,
    optimize_multistart,
    random_warm_starts,
    revelation_time,
    save_policy,
    save_trace,
    schedule_warm_starts,
)
from .lp import LPInfeasibleError, LPUnboundedError, small_lp_solve
from .dual import (
    ColumnGenResult,
    DualTree,
    IndefiniteSupportError,
    TypewiseCostTree,
    column_generation,
    deterministic_cost_vector,
    dual_node_value,
    fixed_tree_dual_value,
    lambda_lp,
    load_dual_tree,
    save_dual_tree,
    support_function,
    typewise_backward_pass,
)
from .sim import (
    ExperimentStats,
    NoiseModel,
    Trajectory,
    batch_experiment,
    load_deltas_csv,
    load_noise,
    load_stats,
    load_trajectories,
    rollout,
    save_deltas_csv,
    save_noise,
    save_stats,
    save_trajectories,
    save_trajectory_csv,
    stochastic_value_correction,
    trajectory_cost,
)
from .scenarios import drone_noise, drone_scenario, hexner_scenario

__version__ = "0.1.0"
