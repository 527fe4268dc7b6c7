"""Geometric rounding of rewards and departure probabilities, plus numeric checks.

Powers are ``(1 + base) ** k`` for integer ``k`` (anchored at 1). Exponents
come from a floating-point logarithm followed by a correction loop, so the
rounding is exact on every representable power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NonAverageCustomer, ValidationError
from .instance import Instance, average_bounds, epsilon_of, instance_to_dict
from .policy import Policy, evaluate_policy_exact

REL_TOL = 1e-12


def floor_exponent(x: float, base: float) -> int:
    """Largest ``k`` with ``(1 + base) ** k <= x``."""
    step = 1.0 + base
    k = math.floor(math.log(x) / math.log1p(base))
    while step ** (k + 1) <= x:
        k += 1
    while step ** k > x:
        k -= 1
    return k


def ceil_exponent(x: float, base: float) -> int:
    """Smallest ``k`` with ``(1 + base) ** k >= x``."""
    step = 1.0 + base
    k = math.ceil(math.log(x) / math.log1p(base))
    while step ** (k - 1) >= x:
        k -= 1
    while step ** k < x:
        k += 1
    return k


def round_up_power(x: float, base: float) -> float:
    return (1.0 + base) ** ceil_exponent(x, base)


def round_down_power(x: float, base: float) -> float:
    return (1.0 + base) ** floor_exponent(x, base)


def powers_in(lo: float, hi: float, base: float) -> int:
    """Number of integer powers of ``1 + base`` inside ``[lo, hi]``."""
    if hi < lo or hi <= 0:
        return 0
    return max(0, floor_exponent(hi, base) - ceil_exponent(max(lo, 1e-300), base) + 1)


# -- rewards -----------------------------------------------------------------------


def round_rewards(inst: Instance, acc) -> list[float]:
    """Round rewards down to powers of ``1 + eps``; tiny rewards become 0.

    A reward exactly at the cut-off ``(eps / n) * r_max`` is kept and rounded.
    """
    eps = epsilon_of(acc)
    r_max = max(inst.rewards)
    if r_max == 0.0:
        return [0.0] * inst.n
    cut = eps / inst.n * r_max
    return [round_down_power(r, eps) if r >= cut else 0.0 for r in inst.rewards]


def reward_value_budget(n: int, eps: float) -> int:
    return math.ceil(math.log(n / eps) / math.log1p(eps)) + 2


# -- probabilities ---------------------------------------------------------------


def _round_prob(p: float, eps: float, delta: float) -> tuple[float, float]:
    if p <= eps / 4.0:
        up = round_up_power(p, delta)
        return up, up / (1.0 + delta)
    q = round_down_power(1.0 - p, delta)
    return 1.0 - q, 1.0 - (1.0 + delta) * q


def round_probs(inst: Instance, acc, n_ref: int | None = None) -> tuple[list[float], list[float]]:
    """Up- and down-rounded departure probabilities of an all-average instance.

    ``n_ref`` is the customer count used for the average thresholds; pass the
    parent instance's ``n`` when rounding a sub-instance.
    """
    eps = epsilon_of(acc)
    delta = eps * eps / 16.0
    n = inst.n if n_ref is None else n_ref
    lo, hi = average_bounds(n, eps)
    up, down = [], []
    for i, p in enumerate(inst.probs):
        if not lo <= p <= hi:
            raise NonAverageCustomer(i)
        pu, pd = _round_prob(p, eps, delta)
        assert pd <= p <= pu <= 1.0, (i, p, pu, pd)
        up.append(pu)
        down.append(pd)
    return up, down


def prob_value_budget(n: int, eps: float) -> int:
    delta = eps * eps / 16.0
    low = powers_in(eps / (n * n), eps / 4.0, delta)
    high = powers_in(eps / n, 1.0 - eps / 4.0, delta)
    return low + high + 2


@dataclass(frozen=True)
class RoundedInstance:
    """An instance together with its rounded rewards and probabilities."""

    base: Instance
    rounded_rewards: tuple[float, ...]
    p_up: tuple[float, ...]
    p_down: tuple[float, ...]
    epsilon: float = field(default=0.0)

    @property
    def n(self) -> int:
        return self.base.n

    def up_instance(self) -> Instance:
        return Instance(self.rounded_rewards, self.p_up)

    def down_instance(self) -> Instance:
        return Instance(self.base.rewards, self.p_down)

    def to_dict(self) -> dict:
        doc = instance_to_dict(self.base)
        doc["r_rounded"] = list(self.rounded_rewards)
        doc["p_up"] = list(self.p_up)
        doc["p_down"] = list(self.p_down)
        return doc


def round_instance(inst: Instance, acc, n_ref: int | None = None) -> RoundedInstance:
    """Round rewards and probabilities, asserting the distinct-value budgets."""
    eps = epsilon_of(acc)
    n = inst.n if n_ref is None else n_ref
    rt = round_rewards(inst, eps)
    up, down = round_probs(inst, eps, n_ref=n)
    if len(set(rt)) > reward_value_budget(n, eps):
        raise AssertionError("rounded rewards exceed their distinct-value budget")
    budget = prob_value_budget(n, eps)
    if len(set(up)) > budget or len(set(down)) > budget:
        raise AssertionError("rounded probabilities exceed their distinct-value budget")
    return RoundedInstance(inst, tuple(rt), tuple(up), tuple(down), eps)


# -- power inequality checks ---------------------------------------------------------


@dataclass
class GridReport:
    ok: bool
    checked: int
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checked": self.checked,
                "violations": [{"delta": d, "lhs": a, "rhs": b} for d, a, b in self.violations]}


def _check_pair(p_up, p_down):
    if not (0.0 <= p_down <= p_up < 1.0):
        raise ValidationError(f"need 0 <= p_down <= p_up < 1, got ({p_up}, {p_down})")


def short_horizon_grid(eps: float) -> list[float]:
    top = 1.0 / eps
    ints = [float(d) for d in range(math.ceil(top))]
    inner = [(k + 0.5) * top / 20.0 for k in range(20)]
    return ints + [d for d in inner if d != int(d)]


LONG_HORIZON_GRID = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0, 1e3, 1e4)


def check_short_horizon(p_up: float, p_down: float, eps: float) -> GridReport:
    """``(1 - p_up)^D >= (1 - eps) (1 - p_down)^D`` for ``D`` on a grid below ``1/eps``."""
    _check_pair(p_up, p_down)
    grid = short_horizon_grid(eps)
    bad = []
    for d in grid:
        lhs = (1.0 - p_up) ** d
        rhs = (1.0 - eps) * (1.0 - p_down) ** d
        if lhs < rhs * (1.0 - REL_TOL):
            bad.append((d, lhs, rhs))
    return GridReport(not bad, len(grid), bad)


def check_long_horizon(p_up: float, p_down: float, eps: float) -> GridReport:
    """``(1 - p_up)^((1 - eps) D) >= (1 - p_down)^D`` on a fixed grid of ``D``."""
    _check_pair(p_up, p_down)
    bad = []
    for d in LONG_HORIZON_GRID:
        lhs = (1.0 - p_up) ** ((1.0 - eps) * d)
        rhs = (1.0 - p_down) ** d
        if lhs < rhs * (1.0 - REL_TOL):
            bad.append((d, lhs, rhs))
    return GridReport(not bad, len(LONG_HORIZON_GRID), bad)


def rounding_grid(n: int, eps: float, points: int = 41) -> np.ndarray:
    lo, hi = average_bounds(n, eps)
    return np.linspace(lo, hi, points)


# -- reward sandwich ---------------------------------------------------------------


@dataclass(frozen=True)
class SandwichReport:
    value: float
    rounded_value: float
    opt_value: float
    epsilon: float

    @property
    def lower(self) -> float:
        return (1.0 - self.epsilon) * self.value - self.epsilon * self.opt_value

    def holds(self, tol: float = 1e-9) -> bool:
        return self.lower - tol <= self.rounded_value <= self.value + tol

    def to_dict(self) -> dict:
        return {"value": self.value, "rounded_value": self.rounded_value,
                "opt": self.opt_value, "lower": self.lower, "ok": self.holds()}


def reward_sandwich_check(inst: Instance, acc, pol: Policy, opt_value: float | None = None) -> SandwichReport:
    """Compare a policy's value under original and rounded rewards."""
    from .exact import solve_exact

    eps = epsilon_of(acc)
    value = evaluate_policy_exact(inst, pol)
    rounded = evaluate_policy_exact(inst, pol, rewards=round_rewards(inst, eps))
    if opt_value is None:
        opt_value = solve_exact(inst).opt_value
    return SandwichReport(value, rounded, opt_value, eps)
