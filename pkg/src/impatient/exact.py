"""Exact adaptive optimum by dynamic programming over available-set bit masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InstanceTooLarge
from .instance import Instance, full_mask, members, submasks
from .policy import EXACT_CAP, TablePolicy

BRUTE_FORCE_CAP = 4


def _levels(n: int) -> list[np.ndarray]:
    masks = np.arange(1 << n, dtype=np.int64)
    counts = np.bitwise_count(masks)
    order = np.argsort(counts, kind="stable")
    bounds = np.searchsorted(counts[order], np.arange(n + 2))
    return [order[bounds[k]:bounds[k + 1]] for k in range(n + 1)]


def survivor_expectation(values: np.ndarray, probs, out: np.ndarray | None = None) -> np.ndarray:
    """``E[values[B \\ D]]`` for every mask ``B``, where ``D`` departs independently.

    The expectation factors over customers, so it is applied one bit at a
    time: ``O(n 2^n)`` instead of enumerating ``3^n`` (B, D) pairs.
    """
    g = np.array(values, dtype=float, copy=True) if out is None else out
    size = g.shape[0]
    for k, p in enumerate(probs):
        bit = 1 << k
        # view as blocks [.., 2, bit]: index 1 along axis 1 has bit k set
        v = g.reshape(size // (2 * bit), 2, bit)
        v[:, 1, :] = (1.0 - p) * v[:, 1, :] + p * v[:, 0, :]
    return g


@dataclass(frozen=True)
class ExactSolution:
    """Optimal value and a stage-independent optimal action table.

    ``actions[A]`` is the customer served from available set ``A`` (-1 for the
    empty set); ``values[A]`` is the optimal expected reward from ``A``.
    """

    opt_value: float
    actions: np.ndarray
    values: np.ndarray

    @property
    def n(self) -> int:
        return int(self.actions.shape[0]).bit_length() - 1

    @property
    def action_table(self) -> dict[int, int]:
        return {a: int(self.actions[a]) for a in range(1, self.actions.shape[0])}

    def policy(self, horizon: int | None = None) -> TablePolicy:
        return TablePolicy(self.actions, horizon)

    def to_dict(self, dump_policy: bool = False) -> dict:
        doc: dict = {"opt": float(self.opt_value)}
        if dump_policy:
            doc["actions"] = [{"avail": a, "serve": int(self.actions[a])}
                              for a in range(1, self.actions.shape[0])]
        return doc


def solve_exact(inst: Instance, cap: int = EXACT_CAP, rewards=None, probs=None) -> ExactSolution:
    """Optimal adaptive policy; ties go to the lowest customer index.

    Sets are processed by cardinality. For each set ``A`` of size ``L`` the
    best service uses survivor expectations of sets of size ``L - 1``, and the
    per-bit factors of the expectation for size ``L`` are then filled in.
    """
    n = inst.n
    if n > cap:
        raise InstanceTooLarge(n, cap)
    r = np.asarray(inst.rewards if rewards is None else rewards, dtype=float)
    p = np.asarray(inst.probs if probs is None else probs, dtype=float)
    size = 1 << n
    # g[k][B]: expectation over departures of the first k customers only
    g = np.zeros((n + 1, size))
    values = np.zeros(size)
    actions = np.full(size, -1, dtype=np.int64)
    bits = [1 << k for k in range(n)]
    for level in _levels(n)[1:]:
        best = np.full(level.shape, -np.inf)
        arg = np.full(level.shape, -1, dtype=np.int64)
        for i in range(n):
            has = (level & bits[i]) != 0
            cand = np.where(has, r[i] + g[n][level & ~bits[i]], -np.inf)
            better = cand > best
            best = np.where(better, cand, best)
            arg = np.where(better, i, arg)
        values[level] = best
        actions[level] = arg
        g[0][level] = best
        for k in range(n):
            has = (level & bits[k]) != 0
            prev = g[k][level]
            dropped = g[k][level & ~bits[k]]
            g[k + 1][level] = np.where(has, (1.0 - p[k]) * prev + p[k] * dropped, prev)
    return ExactSolution(float(values[size - 1]), actions, values)


def solve_exact_staged(inst: Instance, horizon: int | None = None, cap: int = EXACT_CAP) -> np.ndarray:
    """Stage-indexed optimum ``V[t, A]`` for ``t = 1..horizon`` (row 0 unused).

    Used to confirm that the optimum does not depend on the stage once the
    horizon cannot bind.
    """
    n = inst.n
    if n > cap:
        raise InstanceTooLarge(n, cap)
    horizon = 2 * n if horizon is None else horizon
    r = inst.r
    size = 1 << n
    masks = np.arange(size, dtype=np.int64)
    out = np.zeros((horizon + 2, size))
    for t in range(horizon, 0, -1):
        g = survivor_expectation(out[t + 1], inst.probs)
        best = np.zeros(size)
        best[1:] = -np.inf
        for i in range(n):
            has = (masks >> i) & 1 == 1
            best = np.where(has, np.maximum(best, r[i] + g[masks & ~(1 << i)]), best)
        out[t] = best
    return out[: horizon + 1]


def brute_force_enum(inst: Instance, cap: int = BRUTE_FORCE_CAP) -> float:
    """Best value over every stage-independent deterministic table policy.

    All tables are scored at once: one row per table, and each set's value is
    the served reward plus the explicit sum over survivor subsets. No
    maximisation happens until the final comparison of whole tables.
    """
    n = inst.n
    if n > cap:
        raise InstanceTooLarge(n, cap)
    size = 1 << n
    opts = [members(a) for a in range(size)]
    radix = [max(len(o), 1) for o in opts]
    total = int(np.prod(radix))
    idx = np.arange(total, dtype=np.int64)
    r, p = inst.rewards, inst.probs
    vals = np.zeros((total, size))
    stride = 1
    for a in sorted(range(1, size), key=lambda m: (bin(m).count("1"), m)):
        choice = (idx // stride) % radix[a]
        stride *= radix[a]
        for c, i in enumerate(opts[a]):
            rows = choice == c
            rem = a & ~(1 << i)
            acc = np.full(int(rows.sum()), r[i])
            for s in submasks(rem):
                w = 1.0
                for j in members(rem):
                    w *= (1.0 - p[j]) if s >> j & 1 else p[j]
                if w:
                    acc += w * vals[rows, s]
            vals[rows, a] = acc
    return float(vals[:, full_mask(n)].max())
