"""Customer classification and the reductions that isolate average customers.

Stickers (tiny departure probability) can wait until everyone else is gone;
quitters (departure probability near one) are only worth serving
immediately. The policies here make that structure explicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .exceptions import ValidationError
from .instance import Instance, average_bounds, epsilon_of, full_mask, iter_members, members
from .policy import EXACT_CAP, Policy, evaluate_policy_exact, simulate_policy


@dataclass(frozen=True)
class Classification:
    stickers: int
    quitters: int
    average: int

    def to_dict(self) -> dict:
        return {"stickers": members(self.stickers), "quitters": members(self.quitters),
                "average": members(self.average)}


@dataclass(frozen=True)
class MarkedState:
    unmarked: int
    marked: int


def classify(inst: Instance, acc) -> Classification:
    eps = epsilon_of(acc)
    lo, hi = average_bounds(inst.n, eps)
    st = qu = av = 0
    for i, p in enumerate(inst.probs):
        if p < lo:
            st |= 1 << i
        elif p > hi:
            qu |= 1 << i
        else:
            av |= 1 << i
    return Classification(st, qu, av)


def best_sticker(avail: int, stickers: int, rewards) -> int | None:
    """Highest-reward sticker in ``avail``; ties go to the lowest index."""
    best = None
    for i in iter_members(avail & stickers):
        if best is None or rewards[i] > rewards[best]:
            best = i
    return best


class ClassOrderedPolicy(Policy):
    """Follow ``base`` while deferring stickers and refusing late quitters.

    Stage 1 copies ``base`` unless it picks a sticker, which is marked
    instead. Stages ``2..n`` ask ``base`` about the unmarked customers and
    serve its choice only if it is average (otherwise mark it and skip).
    Stages ``n+1..2n`` serve stickers, any of them still present, by
    decreasing reward.

    State is ``(marked, base_state)``.
    """

    def __init__(self, inst: Instance, acc, base: Policy):
        self.inst = inst
        self.cls = classify(inst, acc)
        self.base = base
        self.n = inst.n
        self.horizon = 2 * inst.n

    def initial_state(self):
        return (0, self.base.initial_state())

    def marked_state(self, avail: int, state) -> MarkedState:
        return MarkedState(avail & ~state[0], avail & state[0])

    def act(self, t, avail, state, rng=None):
        marked, bstate = state
        if t > self.horizon:
            return None, state
        if t > self.n:
            return best_sticker(avail, self.cls.stickers, self.inst.rewards), state
        view = avail & ~marked
        if not view:
            return None, state
        a, bstate = self.base.act(t, view, bstate, rng)
        if a is None:
            return None, (marked, bstate)
        bit = 1 << a
        if t == 1:
            if bit & self.cls.stickers:
                return None, (marked | bit, bstate)
            return a, (marked, bstate)
        if bit & self.cls.average:
            return a, (marked, bstate)
        return None, (marked | bit, bstate)

    def ignored(self, t, state):
        if t > self.n:
            return full_mask(self.n) & ~self.cls.stickers
        return state[0] & ~self.cls.stickers


def build_class_ordered(inst: Instance, acc, base: Policy | None = None) -> ClassOrderedPolicy:
    if base is None:
        from .exact import solve_exact

        base = solve_exact(inst).policy()
    return ClassOrderedPolicy(inst, acc, base)


Subsolver = Callable[[Instance], Policy]


class _SubPolicies:
    """Lazily solved sub-instance policies, one per realised average set."""

    def __init__(self, inst: Instance, subsolver: Subsolver):
        self.inst = inst
        self.subsolver = subsolver
        self.cache: dict[int, tuple[Policy, list[int]]] = {}

    def get(self, mask: int):
        hit = self.cache.get(mask)
        if hit is None:
            idx = members(mask)
            hit = (self.subsolver(self.inst.subinstance(idx)), idx)
            self.cache[mask] = hit
        return hit


def _to_local(view: int, idx: list[int]) -> int:
    out = 0
    for k, i in enumerate(idx):
        if view >> i & 1:
            out |= 1 << k
    return out


def _to_global(local: int, idx: list[int]) -> int:
    out = 0
    for k in iter_members(local):
        out |= 1 << idx[k]
    return out


class CompositePolicy(Policy):
    """Serve ``first`` at stage 1, delegate average customers, then stickers.

    At stage 2 the set ``A`` of available average customers is frozen, and
    for stages ``2..n`` the subsolver's policy for the sub-instance on ``A``
    runs (shifted by one stage). Stages ``n+1..2n`` serve stickers by
    decreasing reward. State is ``None`` before stage 2, then
    ``(A, sub_state)``.
    """

    def __init__(self, inst: Instance, cls: Classification, first: int | None, subs: _SubPolicies):
        self.inst = inst
        self.cls = cls
        self.first = first
        self.subs = subs
        self.n = inst.n
        self.horizon = 2 * inst.n

    def act(self, t, avail, state, rng=None):
        if t > self.horizon:
            return None, state
        if t == 1:
            return self.first, None
        if t > self.n:
            return best_sticker(avail, self.cls.stickers, self.inst.rewards), state
        if state is None:
            mask = avail & self.cls.average
            if not mask:
                return None, (0, None)
            sub, _ = self.subs.get(mask)
            state = (mask, sub.initial_state())
        mask, sstate = state
        if not mask:
            return None, state
        sub, idx = self.subs.get(mask)
        view = avail & mask
        if not view:
            return None, state
        a, sstate = sub.act(t - 1, _to_local(view, idx), sstate, rng)
        return (None if a is None else idx[a]), (mask, sstate)

    def removal_probs(self, t, state):
        if t == 1 or t > self.n or state is None or not state[0]:
            return None
        mask, sstate = state
        sub, idx = self.subs.get(mask)
        q = sub.removal_probs(t - 1, sstate)
        if q is None:
            return None
        out = [0.0] * self.n
        for k, i in enumerate(idx):
            out[i] = float(q[k])
        return out

    def ignored(self, t, state):
        full = full_mask(self.n)
        if t > self.n:
            return full & ~self.cls.stickers
        if state is None:
            return self.cls.quitters
        mask, sstate = state
        drop = full & ~(mask | self.cls.stickers)
        if mask:
            sub, idx = self.subs.get(mask)
            drop |= _to_global(sub.ignored(t - 1, sstate), idx)
        return drop


@dataclass
class Reduction:
    """The chosen composite policy and every candidate's score."""

    policy: CompositePolicy
    first: int | None
    scores: list[tuple[int | None, float]]
    exact: bool

    @property
    def value(self) -> float:
        return dict((k, v) for k, v in self.scores)[self.first]


def reduce_to_average(inst: Instance, acc, subsolver: Subsolver, cap: int = EXACT_CAP,
                      episodes: int = 20000, seed: int = 0) -> Reduction:
    """Pick the best first service among quitters, average customers and Skip.

    Candidates are scored exactly when ``n <= cap`` and by simulation otherwise.
    """
    cls = classify(inst, acc)
    subs = _SubPolicies(inst, subsolver)
    candidates: list[int | None] = members(cls.quitters | cls.average) + [None]
    exact = inst.n <= cap
    scores = []
    best = None
    for first in candidates:
        pol = CompositePolicy(inst, cls, first, subs)
        if exact:
            v = evaluate_policy_exact(inst, pol, cap=cap)
        else:
            v = simulate_policy(inst, pol, episodes, seed).mean_reward
        scores.append((first, v))
        if best is None or v > best[1]:
            best = (pol, v, first)
    if best is None:
        raise ValidationError("no candidate first service")
    return Reduction(best[0], best[2], scores, exact)
