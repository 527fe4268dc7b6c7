"""Problem data: customers, instances, accuracy parameters and bit-set helpers.

Customer identity is list position. Available sets are plain Python ints used
as bit sets (bit ``i`` set means customer ``i`` is present), capped at 64
customers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import (
    EmptyInstance,
    NegativeReward,
    ParseError,
    ProbOutOfRange,
    ValidationError,
)
from .rng import INSTANCE, stream

MAX_CUSTOMERS = 64

AvailSet = int


# -- bit sets ---------------------------------------------------------------


def full_mask(n: int) -> AvailSet:
    return (1 << n) - 1


def members(mask: AvailSet) -> list[int]:
    """Indices set in ``mask``, ascending."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def iter_members(mask: AvailSet) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def to_mask(indices: Iterable[int]) -> AvailSet:
    mask = 0
    for i in indices:
        mask |= 1 << int(i)
    return mask


def popcount(mask: AvailSet) -> int:
    return bin(mask).count("1")


def submasks(mask: AvailSet) -> Iterator[AvailSet]:
    """All submasks of ``mask``, including ``mask`` and 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


# -- data model ---------------------------------------------------------------


@dataclass(frozen=True)
class Customer:
    reward: float
    p: float


@dataclass(frozen=True)
class Instance:
    """An ordered, immutable list of customers."""

    rewards: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.rewards) != len(self.probs):
            raise ValidationError("rewards and probs must have equal length")
        validate_instance(self)

    @classmethod
    def from_customers(cls, customers: Sequence[Customer]) -> "Instance":
        return cls(tuple(c.reward for c in customers), tuple(c.p for c in customers))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "Instance":
        pairs = [tuple(x) for x in pairs]
        return cls(tuple(r for r, _ in pairs), tuple(p for _, p in pairs))

    @property
    def n(self) -> int:
        return len(self.rewards)

    @property
    def customers(self) -> list[Customer]:
        return [Customer(r, p) for r, p in zip(self.rewards, self.probs)]

    @cached_property
    def r(self) -> np.ndarray:
        a = np.array(self.rewards, dtype=float)
        a.setflags(write=False)
        return a

    @cached_property
    def p(self) -> np.ndarray:
        a = np.array(self.probs, dtype=float)
        a.setflags(write=False)
        return a

    def with_rewards(self, rewards: Sequence[float]) -> "Instance":
        return Instance(tuple(rewards), self.probs)

    def with_probs(self, probs: Sequence[float]) -> "Instance":
        return Instance(self.rewards, tuple(probs))

    def subinstance(self, idx: Sequence[int]) -> "Instance":
        """Customers ``idx`` (in the given order), re-indexed from 0."""
        return Instance(tuple(self.rewards[i] for i in idx), tuple(self.probs[i] for i in idx))

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class AccuracyParams:
    epsilon: float
    delta: float = field(init=False)

    def __post_init__(self):
        eps = float(self.epsilon)
        if not 0.0 < eps < 0.25:
            raise ValidationError(f"epsilon must lie in (0, 1/4), got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", eps * eps / 16.0)


# -- validation and I/O ---------------------------------------------------------


def validate_instance(inst) -> None:
    """Raise on the first violated customer invariant; return None if valid.

    Accepts an :class:`Instance` or any sequence of objects with ``reward`` and
    ``p`` attributes.
    """
    if isinstance(inst, Instance):
        rewards, probs = inst.rewards, inst.probs
    else:
        rewards = [c.reward for c in inst]
        probs = [c.p for c in inst]
    if len(rewards) == 0:
        raise EmptyInstance()
    if len(rewards) > MAX_CUSTOMERS:
        raise ValidationError(f"at most {MAX_CUSTOMERS} customers are supported")
    for i, (r, p) in enumerate(zip(rewards, probs)):
        if not (math.isfinite(r) and r >= 0.0):
            raise NegativeReward(i)
        if not (0.0 <= p <= 1.0):
            raise ProbOutOfRange(i)


def instance_to_dict(inst: Instance) -> dict:
    return {"customers": [{"reward": r, "p": p} for r, p in zip(inst.rewards, inst.probs)]}


def serialize_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst))


def instance_from_dict(doc) -> Instance:
    if not isinstance(doc, dict) or not isinstance(doc.get("customers"), list):
        raise ParseError('expected an object with a "customers" list')
    rewards, probs = [], []
    for k, c in enumerate(doc["customers"]):
        if not isinstance(c, dict) or "reward" not in c or "p" not in c:
            raise ParseError(f'customer {k} needs "reward" and "p" fields')
        r, p = c["reward"], c["p"]
        if isinstance(r, bool) or isinstance(p, bool) or not all(isinstance(x, (int, float)) for x in (r, p)):
            raise ParseError(f"customer {k} has non-numeric fields")
        rewards.append(float(r))
        probs.append(float(p))
    return Instance(tuple(rewards), tuple(probs))


def parse_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.pos) from None
    return instance_from_dict(doc)


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def random_instance(n: int, reward_range=(0.0, 1.0), prob_range=(0.0, 1.0), seed: int = 0) -> Instance:
    """Draw ``n`` customers with i.i.d. uniform rewards and probabilities."""
    if n < 1:
        raise EmptyInstance()
    lo_r, hi_r = map(float, reward_range)
    lo_p, hi_p = map(float, prob_range)
    if not (0.0 <= lo_r <= hi_r and math.isfinite(hi_r)):
        raise ValidationError(f"invalid reward range {reward_range!r}")
    if not (0.0 <= lo_p <= hi_p <= 1.0):
        raise ValidationError(f"invalid probability range {prob_range!r}")
    rng = stream(seed, INSTANCE)
    rewards = lo_r + (hi_r - lo_r) * rng.random(n)
    probs = lo_p + (hi_p - lo_p) * rng.random(n)
    return Instance(tuple(rewards.tolist()), tuple(np.clip(probs, lo_p, hi_p).tolist()))


def epsilon_of(acc) -> float:
    """Accept an :class:`AccuracyParams` or a bare float accuracy in (0, 1)."""
    if isinstance(acc, AccuracyParams):
        return acc.epsilon
    eps = float(acc)
    if not 0.0 < eps < 1.0:
        raise ValidationError(f"epsilon must lie in (0, 1), got {acc!r}")
    return eps


def average_bounds(n: int, eps: float) -> tuple[float, float]:
    """Closed probability range ``[eps/n^2, 1 - eps/n]`` of average customers."""
    return eps / (n * n), 1.0 - eps / n
