"""Adaptive service policies, exact evaluation and Monte Carlo simulation.

A policy is queried once per stage with the stage index ``t`` (1-based), the
current available set and its own internal state, and answers with the
customer to serve (or ``None`` for Skip) plus its next state. Passing
``state`` explicitly keeps history-dependent policies (marking, elimination,
composite reductions) exactly evaluable by memoising on
``(t, avail, state)``.

``rng=None`` in :meth:`Policy.act` means *exact mode*: the caller enumerates
all randomness itself. Policies whose only randomness is an independent
per-stage "forget this customer" coin expose it through
:meth:`Policy.removal_probs`, which the exact evaluator folds into the
departure step. Any other randomized policy raises in exact mode.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Callable, Hashable, Sequence

import numpy as np

from .exceptions import InstanceTooLarge, PolicyServedUnavailable, ValidationError
from .instance import Instance, full_mask, iter_members, members
from .rng import ENV, POLICY, blocks, stream

EXACT_CAP = 24
SKIP = None


class Policy:
    """Base class for (possibly extended) adaptive service policies.

    Subclasses override :meth:`decide` when they are stateless and
    deterministic, or :meth:`act` otherwise. ``horizon`` is the last stage at
    which the policy may serve; afterwards it skips forever.
    """

    horizon: int = 0
    randomized = False
    supports_batch = False

    def initial_state(self) -> Hashable:
        return None

    def decide(self, t: int, avail: int):
        raise NotImplementedError

    def act(self, t: int, avail: int, state, rng=None):
        if t > self.horizon:
            return SKIP, state
        return self.decide(t, avail), state

    def removal_probs(self, t: int, state):
        """Per-customer probabilities of being dropped at the end of stage ``t``."""
        return None

    def ignored(self, t: int, state) -> int:
        """Customers this policy will never serve or look at from stage ``t`` on."""
        return 0

    # vectorised simulation hooks
    def batch_initial_state(self, size: int):
        return None

    def batch_act(self, t: int, avail: np.ndarray, state, rng):
        raise NotImplementedError


class TablePolicy(Policy):
    """Stage-independent policy given by an action per available-set bit mask.

    ``actions[mask]`` is the customer to serve, or ``-1`` for Skip.
    """

    supports_batch = True

    def __init__(self, actions, horizon: int | None = None):
        self.actions = np.asarray(actions, dtype=np.int64)
        self.n = int(self.actions.shape[0]).bit_length() - 1
        if self.actions.shape[0] != 1 << self.n:
            raise ValidationError("action table length must be a power of two")
        self.horizon = self.n if horizon is None else horizon

    def decide(self, t, avail):
        a = int(self.actions[avail])
        return None if a < 0 else a

    def batch_act(self, t, avail, state, rng):
        if t > self.horizon:
            return np.full(avail.shape, -1, dtype=np.int64), state
        return self.actions[avail], state


class PriorityPolicy(Policy):
    """Serve the earliest customer of ``ordering`` who is still available."""

    supports_batch = True

    def __init__(self, ordering: Sequence[int], horizon: int | None = None):
        self.ordering = [int(i) for i in ordering]
        if sorted(self.ordering) != list(range(len(self.ordering))):
            raise ValidationError("ordering must be a permutation of 0..n-1")
        self.horizon = len(self.ordering) if horizon is None else horizon

    def decide(self, t, avail):
        for i in self.ordering:
            if avail >> i & 1:
                return i
        return None

    def batch_act(self, t, avail, state, rng):
        out = np.full(avail.shape, -1, dtype=np.int64)
        if t > self.horizon:
            return out, state
        for i in reversed(self.ordering):
            out = np.where((avail >> i) & 1 == 1, i, out)
        return out, state


class FunctionPolicy(Policy):
    """Wrap ``fn(t, avail) -> customer | None`` as a deterministic policy."""

    def __init__(self, fn: Callable[[int, int], int | None], horizon: int):
        self.fn = fn
        self.horizon = horizon

    def decide(self, t, avail):
        return self.fn(t, avail)


def priority_policy(ordering: Sequence[int], horizon: int | None = None) -> PriorityPolicy:
    return PriorityPolicy(ordering, horizon)


def always_skip() -> Policy:
    return FunctionPolicy(lambda t, avail: None, horizon=0)


# -- departure step -------------------------------------------------------------


def departure_outcomes(remaining: int, probs) -> list[tuple[int, float]]:
    """Every survivor set of ``remaining`` with its probability.

    Each member ``i`` leaves independently with ``probs[i]``; outcomes of
    probability zero are omitted.
    """
    outcomes = [(remaining, 1.0)]
    for i in iter_members(remaining):
        p = probs[i]
        if p <= 0.0:
            continue
        bit = 1 << i
        if p >= 1.0:
            outcomes = [(m & ~bit, w) for m, w in outcomes]
            continue
        q = 1.0 - p
        nxt = []
        for m, w in outcomes:
            nxt.append((m, w * q))
            nxt.append((m & ~bit, w * p))
        outcomes = nxt
    return outcomes


def sample_departures(avail_after_service: int, probs, rng) -> int:
    """Bit set of customers leaving; each member of the set leaves with its probability."""
    if avail_after_service == 0:
        return 0
    idx = members(avail_after_service)
    u = rng.random(len(idx))
    dep = 0
    for k, i in enumerate(idx):
        if u[k] < probs[i]:
            dep |= 1 << i
    return dep


def _merged_probs(probs, q):
    if q is None:
        return probs
    return [1.0 - (1.0 - p) * (1.0 - qi) for p, qi in zip(probs, q)]


def _check_served(t, avail, a):
    if not (0 <= a < 64 and avail >> a & 1):
        raise PolicyServedUnavailable(t, a)


# -- exact evaluation --------------------------------------------------------------


def evaluate_policy_exact(inst: Instance, pol: Policy, t: int = 1, avail: int | None = None,
                          cap: int = EXACT_CAP, rewards=None, probs=None) -> float:
    """Expected total reward of ``pol`` from state ``(t, avail)`` by exact recursion.

    ``rewards``/``probs`` override the instance's parameters (used to score a
    fixed policy under rounded rewards or altered departure probabilities).
    """
    if inst.n > cap:
        raise InstanceTooLarge(inst.n, cap)
    r = inst.rewards if rewards is None else tuple(float(x) for x in rewards)
    p = inst.probs if probs is None else tuple(float(x) for x in probs)
    start = full_mask(inst.n) if avail is None else avail
    memo: dict = {}
    horizon = pol.horizon

    def value(t, avail, state):
        if avail == 0 or t > horizon:
            return 0.0
        key = (t, avail, state)
        hit = memo.get(key)
        if hit is not None:
            return hit
        a, nstate = pol.act(t, avail, state, None)
        gain = 0.0
        rem = avail
        if a is not None:
            _check_served(t, avail, a)
            gain = r[a]
            rem = avail & ~(1 << a)
        rem &= ~pol.ignored(t + 1, nstate)
        eff = _merged_probs(p, pol.removal_probs(t, nstate))
        future = 0.0
        for nxt, w in departure_outcomes(rem, eff):
            future += w * value(t + 1, nxt, nstate)
        memo[key] = v = gain + future
        return v

    return value(t, start, pol.initial_state())


def stage_distributions(inst: Instance, pol: Policy, t_max: int, cap: int = EXACT_CAP, probs=None):
    """Forward-propagate the process exactly for ``t_max`` stages.

    Returns ``(dists, stage_rewards)`` where ``dists[t-1]`` maps each available
    set at the beginning of stage ``t`` to its probability and
    ``stage_rewards[t-1]`` is the expected reward collected at stage ``t``.
    Customers the policy has declared ignored are dropped from the sets.
    """
    if inst.n > cap:
        raise InstanceTooLarge(inst.n, cap)
    p = inst.probs if probs is None else tuple(float(x) for x in probs)
    r = inst.rewards
    layer = {(full_mask(inst.n), pol.initial_state()): 1.0}
    dists, stage_rewards = [], []
    for t in range(1, t_max + 1):
        marg = defaultdict(float)
        nxt_layer = defaultdict(float)
        er = 0.0
        for (avail, state), w in layer.items():
            marg[avail] += w
            if avail == 0 or t > pol.horizon:
                nxt_layer[(avail, state)] += w
                continue
            a, nstate = pol.act(t, avail, state, None)
            rem = avail
            if a is not None:
                _check_served(t, avail, a)
                er += w * r[a]
                rem = avail & ~(1 << a)
            rem &= ~pol.ignored(t + 1, nstate)
            eff = _merged_probs(p, pol.removal_probs(t, nstate))
            for nxt, pr in departure_outcomes(rem, eff):
                nxt_layer[(nxt, nstate)] += w * pr
        dists.append(dict(marg))
        stage_rewards.append(er)
        layer = nxt_layer
    return dists, stage_rewards


# -- simulation --------------------------------------------------------------------


@dataclass(frozen=True)
class SimResult:
    mean_reward: float
    stderr: float
    episodes: int
    seed: int

    def to_dict(self) -> dict:
        return {"mean": self.mean_reward, "stderr": self.stderr,
                "episodes": self.episodes, "seed": self.seed}

    @classmethod
    def from_totals(cls, totals: np.ndarray, seed: int) -> "SimResult":
        totals = np.asarray(totals, dtype=float)
        m = totals.size
        if totals.min() == totals.max():
            return cls(float(totals[0]), 0.0, m, int(seed))
        mean = math.fsum(totals.tolist()) / m
        sd = float(totals.std(ddof=1))
        return cls(mean, sd / math.sqrt(m), m, int(seed))


_BITS = np.left_shift(np.int64(1), np.arange(62, dtype=np.int64))


def pack_rows(flags: np.ndarray) -> np.ndarray:
    """Pack a boolean ``(rows, n)`` array into one int64 bit mask per row."""
    return (flags * _BITS[: flags.shape[-1]]).sum(axis=-1, dtype=np.int64)


def departure_masks(u: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Bit masks of ``u[k, i] < probs[i]``, one per row."""
    return pack_rows(u < probs)


def _episode(pol, r, p, n, env, prng):
    avail = full_mask(n)
    state = pol.initial_state()
    total = 0.0
    t = 1
    horizon = pol.horizon
    while avail and t <= horizon:
        a, state = pol.act(t, avail, state, prng)
        if a is not None:
            _check_served(t, avail, a)
            total += r[a]
            avail &= ~(1 << a)
        if avail:
            avail &= ~sample_departures(avail, p, env)
        t += 1
    return total


def _batch_block(pol, r, p, n, size, env, prng):
    avail = np.full(size, full_mask(n), dtype=np.int64)
    state = pol.batch_initial_state(size)
    total = np.zeros(size)
    for t in range(1, pol.horizon + 1):
        live = avail != 0
        if not live.any():
            break
        a, state = pol.batch_act(t, avail, state, prng)
        a = np.where(live, a, -1)
        served = a >= 0
        if served.any():
            sa = a[served]
            ok = (avail[served] >> sa) & 1
            if not ok.all():
                k = int(np.flatnonzero(ok == 0)[0])
                raise PolicyServedUnavailable(t, int(sa[k]))
            total[served] += r[sa]
            avail[served] &= ~np.left_shift(np.int64(1), sa)
        avail &= ~departure_masks(env.random((size, n)), p)
    return total


def simulate_policy(inst: Instance, pol: Policy, episodes: int, seed: int = 0,
                    probs=None, rewards=None) -> SimResult:
    """Monte Carlo estimate of the expected reward of ``pol``.

    Episodes run in fixed blocks with block-derived environment and policy
    streams, so the result depends only on ``(inst, pol, episodes, seed)``.
    """
    if episodes < 1:
        raise ValidationError("episodes must be >= 1")
    n = inst.n
    r = np.array(inst.rewards if rewards is None else rewards, dtype=float)
    p = np.array(inst.probs if probs is None else probs, dtype=float)
    use_batch = pol.supports_batch and n <= 62
    totals = []
    for b, size in blocks(episodes):
        env = stream(seed, ENV, b)
        prng = stream(seed, POLICY, b)
        if use_batch:
            totals.append(_batch_block(pol, r, p, n, size, env, prng))
        else:
            rl, pl = r.tolist(), p.tolist()
            totals.append(np.array([_episode(pol, rl, pl, n, env, prng) for _ in range(size)]))
    return SimResult.from_totals(np.concatenate(totals), seed)


# -- skip stripping ----------------------------------------------------------------


class SkipStripped(Policy):
    """Standard policy obtained from an extended one by simulating its idle stages.

    Whenever the wrapped policy would skip, the departure step is simulated
    internally on the customers it still believes present, and its stage
    counter advances until it serves. Customers that departed in simulation
    are remembered in ``ghost`` and hidden from the wrapped policy.
    """

    randomized = True

    def __init__(self, inner: Policy, probs: Sequence[float]):
        self.inner = inner
        self.probs = list(map(float, probs))
        self.horizon = inner.horizon

    def initial_state(self):
        return (1, 0, self.inner.initial_state())

    def act(self, t, avail, state, rng=None):
        if rng is None:
            raise ValidationError("skip-stripped policies are randomized; simulate them")
        tau, ghost, inner_state = state
        view = avail & ~ghost
        while view and tau <= self.inner.horizon:
            a, inner_state = self.inner.act(tau, view, inner_state, rng)
            if a is not None:
                _check_served(tau, view, a)
                return a, (tau + 1, ghost, inner_state)
            dep = sample_departures(view, self.probs, rng)
            ghost |= dep
            view &= ~dep
            tau += 1
        return None, (tau, ghost, inner_state)


def strip_skips(pol: Policy, inst: Instance) -> Policy:
    """Wrap an extended policy so it only idles when it has nothing left to serve."""
    return SkipStripped(pol, inst.probs)


def simresult_json(res: SimResult) -> dict:
    return asdict(res)
