import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impatient.exact import solve_exact
from impatient.exceptions import NonAverageCustomer, ValidationError
from impatient.instance import Instance, average_bounds, random_instance
from impatient.policy import priority_policy
from impatient.rounding import (
    ceil_exponent,
    check_long_horizon,
    check_short_horizon,
    floor_exponent,
    prob_value_budget,
    reward_sandwich_check,
    reward_value_budget,
    round_instance,
    round_probs,
    round_rewards,
    rounding_grid,
    short_horizon_grid,
)


def test_reward_example():
    out = round_rewards(Instance((10.0, 3.7, 0.001), (0.5,) * 3), 0.5)
    assert out == [1.5**5, 1.5**3, 0.0]
    assert out[0] == 7.59375 and out[1] == 3.375


def test_reward_fixed_points():
    assert round_rewards(Instance((1.0,), (0.5,)), 0.1) == [1.0]
    assert round_rewards(Instance((0.0, 0.0), (0.5, 0.5)), 0.1) == [0.0, 0.0]
    powers = tuple(1.2**k for k in range(4))
    assert round_rewards(Instance(powers, (0.5,) * 4), 0.2) == list(powers)


def test_reward_cutoff_equality_keeps_power():
    # r = (eps/n) r_max exactly: the power branch applies
    inst = Instance((8.0, 1.0), (0.5, 0.5))
    assert round_rewards(inst, 0.25) == [(1.25) ** floor_exponent(8.0, 0.25), 1.0]


def test_exponent_helpers_exact_on_powers():
    for base in (0.01, 0.25, 0.5):
        for k in range(-300, 300, 7):
            x = (1 + base) ** k
            assert floor_exponent(x, base) == k and ceil_exponent(x, base) == k
    assert ceil_exponent(0.1, 0.01) == -231
    assert floor_exponent(0.5, 0.01) == -70


def test_prob_low_case_example():
    up, down = round_probs(Instance((1.0,) * 10, (0.1,) + (0.5,) * 9), 0.4)
    assert up[0] == 1.01**-231
    assert up[0] == pytest.approx(0.1004067, abs=1e-7)
    assert down[0] == pytest.approx(up[0] / 1.01, rel=1e-15)
    assert down[0] <= 0.1 <= up[0]


def test_prob_high_case_example():
    up, down = round_probs(Instance((1.0,) * 10, (0.5,) * 10), 0.4)
    q = 1.01**-70
    assert q == pytest.approx(0.498315, abs=1e-6)
    assert up[0] == 1 - q and up[0] == pytest.approx(0.501685, abs=1e-6)
    assert down[0] == pytest.approx(0.496702, abs=1e-6)


def test_prob_power_is_fixed_point():
    delta = 0.2**2 / 16
    p = (1 + delta) ** -1300
    up, down = round_probs(Instance((1.0,) * 3, (p, 0.5, 0.5)), 0.2)
    assert up[0] == p and down[0] == p / (1 + delta)


def test_prob_case_boundary_is_low():
    eps = 0.2
    up, _ = round_probs(Instance((1.0,) * 4, (eps / 4, 0.5, 0.5, 0.5)), eps)
    delta = eps * eps / 16
    assert up[0] == (1 + delta) ** ceil_exponent(eps / 4, delta)


def test_non_average_rejected():
    with pytest.raises(NonAverageCustomer) as exc:
        round_probs(Instance((1.0, 1.0), (0.5, 0.9999)), 0.2)
    assert exc.value.index == 1
    with pytest.raises(NonAverageCustomer):
        round_probs(Instance((1.0, 1.0), (1e-6, 0.5)), 0.2)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.24), st.integers(2, 40), st.floats(0, 1))
def test_prob_sandwich_property(eps, n, u):
    lo, hi = average_bounds(n, eps)
    p = lo + u * (hi - lo)
    up, down = round_probs(Instance((1.0,), (p,)), eps, n_ref=n)
    assert down[0] <= p <= up[0] <= 1.0
    delta = eps * eps / 16
    if p <= eps / 4:
        assert down[0] == pytest.approx(up[0] / (1 + delta), rel=1e-15)
    else:
        assert 1 - down[0] == pytest.approx((1 + delta) * (1 - up[0]), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.integers(0, 10**6), st.floats(0.01, 0.24))
def test_reward_properties(n, seed, eps):
    inst = random_instance(n, (0, 100), (0.5, 0.5), seed=seed)
    out = round_rewards(inst, eps)
    assert all(0 <= a <= r for a, r in zip(out, inst.rewards))
    assert len(set(out)) <= reward_value_budget(n, eps)
    order = sorted(range(n), key=lambda i: inst.rewards[i])
    assert all(out[a] <= out[b] for a, b in zip(order, order[1:]))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10**6), st.sampled_from([0.1, 0.2, 0.24]))
def test_budgets_and_order(n, seed, eps):
    lo, hi = average_bounds(n, eps)
    inst = random_instance(n, (0, 10), (lo, hi), seed=seed)
    ri = round_instance(inst, eps)
    assert len(set(ri.p_up)) <= prob_value_budget(n, eps)
    pairs = sorted(zip(inst.probs, ri.p_up))
    for (p1, u1), (p2, u2) in zip(pairs, pairs[1:]):
        if (p1 <= eps / 4) == (p2 <= eps / 4):
            assert u1 <= u2


def test_rounded_instance_json():
    ri = round_instance(Instance((2.0, 1.0), (0.3, 0.6)), 0.2)
    doc = ri.to_dict()
    assert set(doc) == {"customers", "r_rounded", "p_up", "p_down"}
    assert doc["r_rounded"] == list(ri.rounded_rewards)


def test_short_horizon_checks():
    rep = check_short_horizon(0.3, 0.3, 0.2)
    assert rep.ok and rep.checked == len(short_horizon_grid(0.2))
    assert all(d < 5 for d in short_horizon_grid(0.2))
    assert sum(d != int(d) for d in short_horizon_grid(0.2)) == 20
    bad = check_short_horizon(0.9, 0.1, 0.2)
    assert not bad.ok and bad.violations[0][0] > 0


def test_long_horizon_checks():
    assert check_long_horizon(0.3, 0.3, 0.2).ok
    assert check_long_horizon(0.0, 0.0, 0.2).ok
    assert not check_long_horizon(0.6, 0.3, 0.2).ok
    up, down = round_probs(Instance((1.0,) * 10, (0.5,) * 10), 0.2)
    assert check_long_horizon(up[0], down[0], 0.2).ok
    with pytest.raises(ValidationError):
        check_long_horizon(0.2, 0.3, 0.2)


def test_rounding_grid_has_no_violations():
    for n in (5, 10):
        grid = rounding_grid(n, 0.2)
        assert grid[0] == 0.2 / n**2 and len(grid) == 41
        up, down = round_probs(Instance((1.0,) * len(grid), tuple(grid)), 0.2, n_ref=n)
        for a, b in zip(up, down):
            assert check_short_horizon(a, b, 0.2).ok and check_long_horizon(a, b, 0.2).ok


def test_sandwich_examples():
    powers = Instance(tuple(1.25**k for k in range(3)), (0.3, 0.5, 0.7))
    rep = reward_sandwich_check(powers, 0.25, solve_exact(powers).policy())
    assert rep.rounded_value == rep.value and rep.holds()
    zero = Instance((0.0, 0.0), (0.3, 0.5))
    rep = reward_sandwich_check(zero, 0.25, priority_policy([0, 1]))
    assert rep.value == rep.rounded_value == rep.opt_value == 0.0 and rep.holds()


@pytest.mark.parametrize("seed", range(5))
def test_sandwich_random(seed):
    inst = random_instance(6, (0, 10), (0, 1), seed=seed)
    sol = solve_exact(inst)
    rep = reward_sandwich_check(inst, 0.2, sol.policy(), sol.opt_value)
    assert rep.holds()
    assert math.isclose(rep.opt_value, sol.opt_value)
