import numpy as np
import pytest

from impatient.instance import Instance


def mixed_instance(n, eps, rng, reward_range=(0.0, 10.0)):
    """Random instance drawing each customer's probability from one of the three classes."""
    lo, hi = eps / (n * n), 1.0 - eps / n
    probs = []
    for _ in range(n):
        kind = rng.integers(3)
        if kind == 0:
            probs.append(float(rng.uniform(0.0, lo)))
        elif kind == 1:
            probs.append(float(rng.uniform(lo, hi)))
        else:
            probs.append(float(rng.uniform(hi, 1.0)))
    rewards = rng.uniform(*reward_range, size=n)
    return Instance(tuple(rewards.tolist()), tuple(probs))


def few_pairs_instance(n, rng, pairs=3):
    """Random instance with at most ``pairs`` distinct (reward, p) combinations."""
    values = [(float(rng.integers(1, 6)), float(rng.choice([0.05, 0.2, 0.4, 0.7, 0.9])))
              for _ in range(pairs)]
    picks = rng.integers(len(values), size=n)
    return Instance.from_pairs([values[k] for k in picks])


def prerounded_instance(n, eps, rng):
    """All-average instance whose rewards and probabilities are fixed points of rounding."""
    delta = eps * eps / 16.0
    rewards = [(1.0 + eps) ** int(rng.integers(0, 3)) for _ in range(n)]
    probs = []
    for _ in range(n):
        if rng.random() < 0.5:
            q = (1.0 + delta) ** -int(rng.choice([40, 120, 200]))  # q in [0.5, 0.95): p = 1 - q is exact
            probs.append(1.0 - q)
        else:
            probs.append((1.0 + delta) ** -int(rng.choice([1250, 1400])))
    return Instance(tuple(rewards), tuple(probs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two():
    return Instance((10.0, 6.0), (0.1, 0.5))
