"""scikit-learn style wrappers around the solvers.

Each estimator is fitted on one instance, given as an :class:`Instance`, an
instance JSON document (dict), or an ``(n, 2)`` array of ``(reward, p)`` rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .class_dp import STATE_BUDGET, as_customer_policy, build_classes, solve_class_dp
from .exceptions import ValidationError
from .exact import solve_exact
from .instance import AccuracyParams, Instance, instance_from_dict
from .pipeline import solve_qptas
from .policy import EXACT_CAP
from .preprocess import classify
from .rounding import round_instance, round_probs, round_rewards


def check_instance(X) -> Instance:
    """Coerce supported inputs to a validated :class:`Instance`."""
    if isinstance(X, Instance):
        return X
    if isinstance(X, dict):
        return instance_from_dict(X)
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(f"expected an (n, 2) array of (reward, p) rows, got shape {arr.shape}")
    return Instance(tuple(arr[:, 0].tolist()), tuple(arr[:, 1].tolist()))


def check_epsilon(epsilon) -> float:
    return AccuracyParams(epsilon).epsilon


def check_masks(avail, n: int) -> np.ndarray:
    masks = np.atleast_1d(np.asarray(avail, dtype=np.int64))
    if masks.ndim != 1 or (masks < 0).any() or (masks >= 1 << n).any():
        raise ValidationError(f"available sets must be bit masks in [0, 2^{n})")
    return masks


class ExactSolver(BaseEstimator):
    """Exact optimum; ``predict`` maps available-set masks to the customer served."""

    def __init__(self, cap: int = EXACT_CAP):
        self.cap = cap

    def fit(self, X, y=None):
        inst = check_instance(X)
        self.solution_ = solve_exact(inst, cap=self.cap)
        self.opt_value_ = self.solution_.opt_value
        self.n_customers_ = inst.n
        return self

    def predict(self, avail):
        check_is_fitted(self, "solution_")
        return self.solution_.actions[check_masks(avail, self.n_customers_)]

    def policy(self):
        check_is_fitted(self, "solution_")
        return self.solution_.policy()


class ClassDPSolver(BaseEstimator):
    """Count-vector DP on an instance whose values are already grouped."""

    def __init__(self, state_budget: int = STATE_BUDGET):
        self.state_budget = state_budget

    def fit(self, X, y=None):
        inst = check_instance(X)
        self.table_ = build_classes(inst)
        self.solution_ = solve_class_dp(self.table_, self.state_budget)
        self.opt_value_ = self.solution_.opt_value
        self.policy_ = as_customer_policy(self.solution_, self.table_)
        self.n_customers_ = inst.n
        return self

    def predict(self, avail):
        check_is_fitted(self, "policy_")
        masks = check_masks(avail, self.n_customers_)
        out = [self.policy_.decide(1, int(m)) for m in masks]
        return np.array([-1 if a is None else a for a in out], dtype=np.int64)


class QPTASSolver(BaseEstimator):
    """Full approximation pipeline; ``score`` is the achieved ratio to the optimum."""

    def __init__(self, epsilon: float = 0.2, exact_cap: int = EXACT_CAP, episodes: int = 20000,
                 seed: int = 0, state_budget: int = STATE_BUDGET):
        self.epsilon = epsilon
        self.exact_cap = exact_cap
        self.episodes = episodes
        self.seed = seed
        self.state_budget = state_budget

    def fit(self, X, y=None):
        inst = check_instance(X)
        self.report_ = solve_qptas(inst, check_epsilon(self.epsilon), cap=self.exact_cap,
                                   episodes=self.episodes, seed=self.seed,
                                   state_budget=self.state_budget)
        self.value_ = self.report_.value
        self.policy_ = self.report_.policy
        return self

    def score(self, X=None, y=None):
        check_is_fitted(self, "report_")
        return self.report_.ratio


class InstanceRounder(TransformerMixin, BaseEstimator):
    """Map ``(reward, p)`` rows of an all-average instance to ``(r_rounded, p_up, p_down)``."""

    def __init__(self, epsilon: float = 0.2):
        self.epsilon = epsilon

    def fit(self, X, y=None):
        inst = check_instance(X)
        self.n_ref_ = inst.n
        self.epsilon_ = check_epsilon(self.epsilon)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_ref_")
        inst = check_instance(X)
        if inst.n == self.n_ref_:
            ri = round_instance(inst, self.epsilon_)
            return np.column_stack([ri.rounded_rewards, ri.p_up, ri.p_down])
        up, down = round_probs(inst, self.epsilon_, n_ref=self.n_ref_)
        return np.column_stack([round_rewards(inst, self.epsilon_), up, down])


class CustomerClassifier(BaseEstimator):
    """Label each customer ``sticker``, ``quitter`` or ``average``."""

    def __init__(self, epsilon: float = 0.2):
        self.epsilon = epsilon

    def fit(self, X, y=None):
        inst = check_instance(X)
        self.classification_ = classify(inst, check_epsilon(self.epsilon))
        return self

    def predict(self, X=None):
        check_is_fitted(self, "classification_")
        c = self.classification_
        n = (c.stickers | c.quitters | c.average).bit_length()
        labels = []
        for i in range(n):
            bit = 1 << i
            labels.append("sticker" if c.stickers & bit else "quitter" if c.quitters & bit else "average")
        return np.array(labels)
