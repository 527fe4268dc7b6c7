"""End-to-end approximation pipeline.

The pipeline picks a first service, then hands the average customers to a
subsolver. The subsolver rounds rewards and probabilities, solves the class
DP on the rounded-up instance, and transfers that policy back to the true
probabilities by elimination.
"""

from __future__ import annotations

from dataclasses import dataclass

from .class_dp import STATE_BUDGET, as_customer_policy, build_classes, solve_class_dp
from .coupling import eliminate_transfer
from .exact import solve_exact
from .instance import Instance, epsilon_of
from .policy import EXACT_CAP, Policy, evaluate_policy_exact, simulate_policy
from .preprocess import Reduction, classify, reduce_to_average
from .rounding import round_instance


def rounded_class_subsolver(eps: float, n_ref: int, budget: int = STATE_BUDGET):
    """Subsolver: round, solve the class DP on the rounded-up instance, transfer back."""

    def solve(sub: Instance) -> Policy:
        ri = round_instance(sub, eps, n_ref=n_ref)
        table = build_classes(ri.rounded_rewards, ri.p_up)
        sol = solve_class_dp(table, budget)
        return eliminate_transfer(as_customer_policy(sol, table), sub.probs, ri.p_up)

    return solve


def exact_subsolver(sub: Instance) -> Policy:
    return solve_exact(sub).policy()


@dataclass
class QPTASReport:
    value: float
    stderr: float
    value_exact: bool
    opt: float | None
    first: int | None
    reduction: Reduction
    epsilon: float

    @property
    def ratio(self) -> float | None:
        if self.opt is None:
            return None
        if self.opt == 0.0:
            return 1.0
        return self.value / self.opt

    @property
    def policy(self) -> Policy:
        return self.reduction.policy

    def to_dict(self) -> dict:
        cls = self.reduction.policy.cls
        return {
            "epsilon": self.epsilon,
            "value": self.value,
            "stderr": self.stderr,
            "value_exact": self.value_exact,
            "opt": self.opt,
            "ratio": self.ratio,
            "first": self.first,
            "classification": cls.to_dict(),
        }


def solve_qptas(inst: Instance, acc, cap: int = EXACT_CAP, episodes: int = 20000, seed: int = 0,
                state_budget: int = STATE_BUDGET) -> QPTASReport:
    """Run the pipeline and score it against the exact optimum when ``n <= cap``."""
    eps = epsilon_of(acc)
    red = reduce_to_average(inst, eps, rounded_class_subsolver(eps, inst.n, state_budget),
                            cap=cap, episodes=episodes, seed=seed)
    if inst.n <= cap:
        value, stderr, exact = evaluate_policy_exact(inst, red.policy, cap=cap), 0.0, True
        opt = solve_exact(inst, cap=cap).opt_value
    else:
        res = simulate_policy(inst, red.policy, episodes, seed)
        value, stderr, exact, opt = res.mean_reward, res.stderr, False, None
    return QPTASReport(value, stderr, exact, opt, red.first, red, eps)


__all__ = ["QPTASReport", "classify", "exact_subsolver", "rounded_class_subsolver", "solve_qptas"]
