"""Optimal detection of a switch between two Markov regimes within a precision window [-d1, +d2]."""

from .detector import (
    Decision,
    DetectionReport,
    DetectorState,
    new_detector,
    parse_stream,
    push_index,
    push_observation,
    run_to_decision,
)
from .errors import (
    BudgetExceededError,
    ConfigurationError,
    ContractError,
    DisorderError,
    ImpossiblePathError,
    ModelError,
)
from .likelihood import detection_statistic_g, joint_density_S, log_L, log_L_all
from .model import (
    DisorderModel,
    MarkovKernel,
    PrecisionWindow,
    PriorParams,
    load_model,
    make_model,
    model_hash,
    save_model,
    validate_model,
)
from .montecarlo import ExperimentConfig, ExperimentResult, compare_rules, estimate_success
from .oracle import enumerate_joint, oracle_conditional, oracle_optimal_value, oracle_rule_value
from .posterior import (
    PosteriorState,
    posterior_exact,
    posterior_multistep,
    posterior_step,
    prob_change_before_window,
    prob_change_within,
    window_payoff_h,
)
from .solver import (
    ThresholdTable,
    fixed_point_residual,
    load_table,
    problem_value,
    save_table,
    solve_threshold,
)

__version__ = "0.1.0"
