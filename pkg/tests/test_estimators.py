import numpy as np
import pytest
from sklearn.base import clone

from impatient.estimators import (
    ClassDPSolver,
    CustomerClassifier,
    ExactSolver,
    InstanceRounder,
    QPTASSolver,
    check_instance,
)
from impatient.exceptions import ValidationError
from impatient.instance import Instance, instance_to_dict, random_instance
from impatient.rounding import round_instance
from sklearn.exceptions import NotFittedError

TWO = np.array([[10.0, 0.1], [6.0, 0.5]])


def test_check_instance_inputs(two):
    assert check_instance(TWO) == two
    assert check_instance(instance_to_dict(two)) == two
    assert check_instance(two) is two
    with pytest.raises(ValidationError):
        check_instance(np.zeros((3, 3)))


def test_exact_solver():
    est = ExactSolver().fit(TWO)
    assert est.opt_value_ == pytest.approx(15.0)
    assert est.predict([3, 1, 2, 0]).tolist() == [1, 0, 1, -1]
    with pytest.raises(ValidationError):
        est.predict([4])
    assert est.get_params() == {"cap": 24}
    with pytest.raises(NotFittedError):
        ExactSolver().predict([1])


def test_class_dp_solver_matches_exact():
    inst = Instance.from_pairs([(4.0, 0.3), (4.0, 0.3), (1.0, 0.6), (2.0, 0.1), (1.0, 0.6)])
    est = ClassDPSolver().fit(inst)
    assert est.opt_value_ == pytest.approx(ExactSolver().fit(inst).opt_value_, abs=1e-9)
    assert est.predict([0, 0b00100]).tolist() == [-1, 2]


def test_qptas_solver_score():
    est = QPTASSolver(epsilon=0.2).fit(random_instance(5, (0, 10), (0.05, 0.9), seed=1))
    assert 0.9 <= est.score() <= 1 + 1e-9
    assert clone(est).get_params()["epsilon"] == 0.2
    with pytest.raises(ValidationError):
        QPTASSolver(epsilon=0.5).fit(TWO)


def test_instance_rounder():
    inst = random_instance(4, (0, 10), (0.05, 0.9), seed=2)
    out = InstanceRounder(epsilon=0.2).fit_transform(inst)
    ri = round_instance(inst, 0.2)
    assert out.shape == (4, 3)
    assert np.array_equal(out[:, 1], ri.p_up) and np.array_equal(out[:, 2], ri.p_down)
    sub = InstanceRounder(epsilon=0.2).fit(inst).transform(inst.subinstance([0, 1]))
    assert sub.shape == (2, 3)


def test_customer_classifier():
    inst = Instance((1.0, 2.0, 3.0), (0.001, 0.5, 0.99))
    labels = CustomerClassifier(epsilon=0.2).fit(inst).predict()
    assert labels.tolist() == ["sticker", "average", "quitter"]
