"""Adaptive service of impatient customers: exact optimum, approximation pipeline, coupling checks."""

from .class_dp import ClassTable, as_customer_policy, binomial_pmf, build_classes, solve_class_dp, transition_distribution
from .coupling import (
    EliminationPolicy,
    MilestoneCalendar,
    build_calendar,
    eliminate_transfer,
    gamma_sweep,
    mimic_policy_reward,
    sample_coupled,
    verify_elimination_distribution,
    verify_marginals,
    xi,
)
from .exact import ExactSolution, brute_force_enum, solve_exact
from .exceptions import *  # noqa: F401,F403
from .instance import (
    AccuracyParams,
    Customer,
    Instance,
    load_instance,
    parse_instance,
    random_instance,
    serialize_instance,
    validate_instance,
)
from .pipeline import QPTASReport, solve_qptas
from .policy import (
    Policy,
    SimResult,
    TablePolicy,
    evaluate_policy_exact,
    priority_policy,
    sample_departures,
    simulate_policy,
    strip_skips,
)
from .preprocess import build_class_ordered, classify, reduce_to_average
from .rounding import (
    RoundedInstance,
    check_long_horizon,
    check_short_horizon,
    reward_sandwich_check,
    round_instance,
    round_probs,
    round_rewards,
)

__version__ = "0.1.0"
