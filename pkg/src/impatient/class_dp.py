"""Dynamic program over per-class counts of available customers.

Customers sharing a (reward, departure probability) pair are interchangeable,
so the state only needs how many of each class remain. Count vectors are
stored densely in a numpy array with one axis per class.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import EmptyClassServed, StateSpaceTooLarge
from .instance import Instance, iter_members, to_mask
from .policy import Policy

STATE_BUDGET = 10**7


@dataclass(frozen=True)
class ClassTable:
    """Customer classes ordered by reward (descending) then probability (ascending)."""

    rewards: tuple[float, ...]
    probs: tuple[float, ...]
    members: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(m) for m in self.members)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(m) + 1 for m in self.members)

    @property
    def n_states(self) -> int:
        return math.prod(self.shape)

    @property
    def n_customers(self) -> int:
        return sum(self.counts)

    def class_masks(self) -> list[int]:
        return [to_mask(m) for m in self.members]

    def count_vector(self, avail: int) -> tuple[int, ...]:
        return tuple((avail & m).bit_count() for m in self.class_masks())

    def to_dict(self) -> list[dict]:
        return [{"r": r, "p": p, "members": list(m)}
                for r, p, m in zip(self.rewards, self.probs, self.members)]


def build_classes(rewards: Sequence[float] | Instance, probs: Sequence[float] | None = None) -> ClassTable:
    """Group customers by exact (reward, probability) value pairs."""
    if isinstance(rewards, Instance):
        rewards, probs = rewards.rewards, rewards.probs
    groups: dict[tuple[float, float], list[int]] = {}
    for i, key in enumerate(zip(map(float, rewards), map(float, probs))):
        groups.setdefault(key, []).append(i)
    keys = sorted(groups, key=lambda k: (-k[0], k[1]))
    return ClassTable(tuple(k[0] for k in keys), tuple(k[1] for k in keys),
                      tuple(tuple(groups[k]) for k in keys))


def binomial_pmf(m: int, p: float) -> list[float]:
    """Distribution of the number of departures among ``m`` customers."""
    q = 1.0 - p
    return [math.comb(m, k) * p**k * q ** (m - k) for k in range(m + 1)]


def _survivor_matrix(size: int, p: float) -> np.ndarray:
    # row m: distribution of survivors out of m
    mat = np.zeros((size + 1, size + 1))
    for m in range(size + 1):
        mat[m, : m + 1] = binomial_pmf(m, p)[::-1]
    return mat


def transition_distribution(counts: Sequence[int], served: int, table: ClassTable) -> list[tuple[tuple[int, ...], float]]:
    """Count vectors after serving one customer of class ``served`` and departures."""
    counts = list(counts)
    if counts[served] < 1:
        raise EmptyClassServed(served)
    counts[served] -= 1
    per_class = []
    for m, p in zip(counts, table.probs):
        pmf = binomial_pmf(m, p)
        # survivors j = m - departures, listed from most to fewest
        per_class.append([(m - k, pmf[k]) for k in range(m + 1) if pmf[k] > 0.0])
    out = []
    for combo in itertools.product(*per_class):
        w = 1.0
        for _, pk in combo:
            w *= pk
        out.append((tuple(j for j, _ in combo), w))
    return out


@dataclass(frozen=True)
class ClassSolution:
    values: np.ndarray
    actions: np.ndarray
    table: ClassTable

    @property
    def opt_value(self) -> float:
        return float(self.values[tuple(self.table.counts)])

    def value(self, counts: Sequence[int]) -> float:
        return float(self.values[tuple(counts)])

    def action(self, counts: Sequence[int]) -> int:
        return int(self.actions[tuple(counts)])

    def to_dict(self) -> dict:
        rows = []
        for idx in np.ndindex(*self.table.shape):
            a = int(self.actions[idx])
            rows.append({"counts": list(idx), "v": float(self.values[idx]),
                         "serve": None if a < 0 else a})
        return {"classes": self.table.to_dict(), "values": rows}


def _expect_survivors(values: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
    w = values
    for axis, mat in enumerate(mats):
        w = np.moveaxis(np.tensordot(mat, w, axes=([1], [axis])), 0, axis)
    return w


def _best_service(table, w, out_values, out_actions, select):
    best = np.full(w.shape, -np.inf)
    arg = np.full(w.shape, -1, dtype=np.int64)
    for c, r in enumerate(table.rewards):
        cand = np.full(w.shape, -np.inf)
        dst = [slice(None)] * w.ndim
        src = [slice(None)] * w.ndim
        dst[c] = slice(1, None)
        src[c] = slice(None, -1)
        cand[tuple(dst)] = r + w[tuple(src)]
        better = cand > best
        best = np.where(better, cand, best)
        arg = np.where(better, c, arg)
    out_values[select] = best[select]
    out_actions[select] = arg[select]


def solve_class_dp(table: ClassTable, budget: int = STATE_BUDGET, stage_indexed: bool = False) -> ClassSolution:
    """Optimal value and class action for every count vector.

    States are filled by increasing total count, so every successor of a state
    is final before the state itself is computed. With ``stage_indexed`` the
    recursion instead runs backwards over stages ``n, ..., 1`` with a stage
    cap, which must give the same table.
    """
    size = table.n_states
    if size > budget:
        raise StateSpaceTooLarge(size, budget)
    shape = table.shape
    mats = [_survivor_matrix(s, p) for s, p in zip(table.counts, table.probs)]
    values = np.zeros(shape)
    actions = np.full(shape, -1, dtype=np.int64)
    total = np.indices(shape).sum(axis=0) if shape else np.zeros(())
    n = table.n_customers
    if stage_indexed:
        nxt = np.zeros(shape)
        for _ in range(n):
            cur = np.zeros(shape)
            act = np.full(shape, -1, dtype=np.int64)
            _best_service(table, _expect_survivors(nxt, mats), cur, act, total > 0)
            nxt = cur
        return ClassSolution(nxt, act if n else actions, table)
    for level in range(1, n + 1):
        w = _expect_survivors(values, mats)
        _best_service(table, w, values, actions, total == level)
    return ClassSolution(values, actions, table)


class ClassPolicy(Policy):
    """Serve the lowest-index available member of the class the DP picks."""

    supports_batch = True

    def __init__(self, sol: ClassSolution, table: ClassTable, horizon: int | None = None):
        self.sol = sol
        self.table = table
        self.masks = table.class_masks()
        self.horizon = table.n_customers if horizon is None else horizon
        self._flat = sol.actions.reshape(-1)
        strides = []
        acc = 1
        for s in reversed(table.shape):
            strides.append(acc)
            acc *= s
        self.strides = list(reversed(strides))

    def decide(self, t, avail):
        idx = 0
        for m, s in zip(self.masks, self.strides):
            idx += (avail & m).bit_count() * s
        c = int(self._flat[idx])
        if c < 0:
            return None
        hit = avail & self.masks[c]
        if not hit:
            raise EmptyClassServed(c)
        return next(iter_members(hit))

    def batch_act(self, t, avail, state, rng):
        out = np.full(avail.shape, -1, dtype=np.int64)
        if t > self.horizon:
            return out, state
        idx = np.zeros(avail.shape, dtype=np.int64)
        for m, s in zip(self.masks, self.strides):
            idx += np.bitwise_count(avail & np.int64(m)).astype(np.int64) * s
        cls = self._flat[idx]
        for c, m in enumerate(self.masks):
            sel = cls == c
            if not sel.any():
                continue
            hit = avail[sel] & np.int64(m)
            low = hit & -hit
            out[sel] = np.where(hit != 0, np.bitwise_count(low - 1).astype(np.int64), -1)
        return out, state


def as_customer_policy(sol: ClassSolution, table: ClassTable, horizon: int | None = None) -> ClassPolicy:
    return ClassPolicy(sol, table, horizon)
