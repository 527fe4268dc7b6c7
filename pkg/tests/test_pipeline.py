import numpy as np
import pytest
from conftest import mixed_instance, prerounded_instance

from impatient.instance import Instance, random_instance
from impatient.pipeline import exact_subsolver, rounded_class_subsolver, solve_qptas
from impatient.policy import evaluate_policy_exact
from impatient.preprocess import reduce_to_average


def test_single_customer_ratio_one():
    rep = solve_qptas(Instance((3.0,), (0.4,)), 0.2)
    assert rep.ratio == pytest.approx(1.0, abs=1e-12)
    assert rep.value_exact and rep.stderr == 0.0


def test_empty_reward_ratio_defined():
    rep = solve_qptas(Instance((0.0, 0.0), (0.3, 0.6)), 0.2)
    assert rep.opt == 0.0 and rep.ratio == 1.0


@pytest.mark.parametrize("seed", range(4))
def test_prerounded_instance_is_solved_exactly(seed):
    inst = prerounded_instance(6, 0.2, np.random.default_rng(seed))
    rep = solve_qptas(inst, 0.2)
    assert rep.ratio == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_ratio_on_average_instances(seed):
    inst = random_instance(6, (0, 10), (0.01, 0.9), seed=seed)
    rep = solve_qptas(inst, 0.25, seed=1)
    assert rep.ratio <= 1.0 + 1e-9
    assert rep.ratio >= 0.9


@pytest.mark.parametrize("seed", range(4))
def test_ratio_on_mixed_instances(seed):
    inst = mixed_instance(7, 0.2, np.random.default_rng(100 + seed))
    rep = solve_qptas(inst, 0.2)
    assert 0.8 <= rep.ratio <= 1.0 + 1e-9
    assert rep.value == pytest.approx(evaluate_policy_exact(inst, rep.policy), abs=1e-12)


def test_report_dict_fields():
    rep = solve_qptas(random_instance(4, (0, 5), (0.05, 0.9), seed=2), 0.2)
    doc = rep.to_dict()
    assert set(doc) >= {"value", "stderr", "opt", "ratio", "first", "classification", "epsilon"}
    assert doc["classification"]["average"] or doc["classification"]["stickers"] or doc["classification"]["quitters"]


def test_monte_carlo_path_when_over_cap():
    inst = random_instance(6, (0, 10), (0.05, 0.9), seed=3)
    rep = solve_qptas(inst, 0.25, cap=4, episodes=4000, seed=2)
    assert not rep.value_exact and rep.opt is None and rep.ratio is None
    assert rep.stderr > 0
    exact = evaluate_policy_exact(inst, rep.policy)
    assert abs(rep.value - exact) <= 5 * rep.stderr


def test_rounded_subsolver_not_worse_than_bound_of_exact():
    inst = random_instance(5, (0, 10), (0.05, 0.9), seed=9)
    a = reduce_to_average(inst, 0.2, exact_subsolver).value
    b = reduce_to_average(inst, 0.2, rounded_class_subsolver(0.2, inst.n)).value
    assert b <= a + 1e-9
    assert b >= 0.9 * a


def test_deterministic_reports():
    inst = random_instance(6, (0, 10), (0.05, 0.9), seed=3)
    a = solve_qptas(inst, 0.25, cap=4, episodes=2000, seed=5).to_dict()
    b = solve_qptas(inst, 0.25, cap=4, episodes=2000, seed=5).to_dict()
    assert a == b
