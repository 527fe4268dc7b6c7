"""Coupled departure processes and policy transfer between probability levels.

Two copies of the departure process run side by side. The *down* process uses
the down-rounded probabilities on every stage. The *up* process uses the
up-rounded probabilities but only lives on *regular* stages: every
``1/eps``-th stage of the down process (offset by ``gamma``) is a milestone
that the up process never sees. Indicators ``Y_up[i, s]`` (does ``i``
leave at up-stage ``s``) and ``Y_down[i, tau]`` are generated jointly so that
a down departure on a regular stage implies an up departure on the matching
stage, while each matrix keeps its own i.i.d. Bernoulli law.

The second half of the module transfers a policy designed for larger
departure probabilities to smaller ones by randomly hiding customers.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import (
    GammaOutOfRange,
    InstanceTooLarge,
    NonIntegerInverseEpsilon,
    ProbOrderViolated,
    ValidationError,
)
from .instance import Instance, full_mask
from .policy import Policy, SimResult, departure_masks, pack_rows, stage_distributions
from .rng import COUPLING, blocks, stream

ELIMINATION_CAP = 5


# -- calendar ----------------------------------------------------------------------


def inverse_epsilon(eps: float) -> int:
    inv = round(1.0 / eps)
    if inv < 2 or abs(1.0 / eps - inv) > 1e-9:
        raise NonIntegerInverseEpsilon(eps)
    return inv


def reciprocal_epsilon(eps: float) -> float:
    """Largest ``1/m`` (``m >= 2`` an integer) that does not exceed ``eps``."""
    return 1.0 / max(2, math.ceil(1.0 / eps - 1e-12))


@dataclass(frozen=True)
class MilestoneCalendar:
    """Milestones ``t_k = (k - 1)/eps + gamma`` and the regular-stage map.

    ``mu[t]`` (``t = 1..horizon``) is the ``t``-th regular stage;
    ``mu_inv[tau]`` is its inverse on regular stages and 0 on milestones.
    """

    epsilon: float
    gamma: int
    horizon: int
    period: int
    milestones: tuple[int, ...]
    mu: tuple[int, ...]
    mu_inv: tuple[int, ...]

    @property
    def down_horizon(self) -> int:
        return self.mu[self.horizon]

    def is_milestone(self, tau: int) -> bool:
        return tau >= self.gamma and (tau - self.gamma) % self.period == 0

    def milestone_index(self, tau: int) -> int:
        """``k`` with ``t_k <= tau < t_{k+1}`` (0 before the first milestone)."""
        if tau < self.gamma:
            return 0
        return (tau - self.gamma) // self.period + 1

    def milestone(self, k: int) -> int:
        return 0 if k == 0 else (k - 1) * self.period + self.gamma

    def previous_milestone(self, tau: int) -> int:
        """Largest milestone strictly below ``tau`` (0 if there is none)."""
        return self.milestone(self.milestone_index(tau - 1))

    def window_gap(self, k: int) -> int:
        """Number of regular stages strictly between ``t_{k-1}`` and ``t_k``."""
        return self.milestone(k) - self.milestone(k - 1) - 1


def build_calendar(eps: float, gamma: int, horizon: int) -> MilestoneCalendar:
    period = inverse_epsilon(eps)
    if not (isinstance(gamma, (int, np.integer)) and 1 <= gamma <= period):
        raise GammaOutOfRange(gamma, period)
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    gamma = int(gamma)
    mu = [0]
    tau = 0
    while len(mu) <= horizon:
        tau += 1
        if not (tau >= gamma and (tau - gamma) % period == 0):
            mu.append(tau)
    top = mu[horizon]
    ms = tuple(range(gamma, top + period + 1, period))
    inv = [0] * (top + 1)
    for t in range(1, horizon + 1):
        inv[mu[t]] = t
    return MilestoneCalendar(1.0 / period, gamma, horizon, period, ms, tuple(mu), tuple(inv))


# -- samplers ----------------------------------------------------------------------


def xi(p_up: float, p_down: float, gap: int) -> float:
    """Milestone correction ``1 - ((1 - p_up)/(1 - p_down)) ** gap``."""
    if not (0.0 <= p_down <= p_up < 1.0) or gap < 0:
        raise ValidationError(f"need 0 <= p_down <= p_up < 1 and gap >= 0, got {p_up}, {p_down}, {gap}")
    val = 1.0 - ((1.0 - p_up) / (1.0 - p_down)) ** gap
    if not (-1e-15 <= val <= p_down + 1e-15):
        raise ValidationError(f"milestone correction {val} outside [0, p_down={p_down}]")
    return min(max(val, 0.0), p_down)


@dataclass(frozen=True)
class CouplingRates:
    """Per-customer Bernoulli rates used by the coupled sampler."""

    p_up: np.ndarray
    p_down: np.ndarray
    z: np.ndarray
    w: dict

    @classmethod
    def build(cls, p_up: Sequence[float], p_down: Sequence[float], cal: MilestoneCalendar) -> "CouplingRates":
        up = np.asarray(p_up, dtype=float)
        down = np.asarray(p_down, dtype=float)
        for i, (a, b) in enumerate(zip(up, down)):
            if not 0.0 <= b <= a < 1.0:
                raise ProbOrderViolated(i)
        z = np.divide(down, up, out=np.zeros_like(down), where=up > 0)
        w = {}
        for gap in {cal.window_gap(1), cal.period - 1}:
            x = np.array([xi(a, b, gap) for a, b in zip(up, down)])
            w[gap] = (down - x) / (1.0 - x)
        return cls(up, down, z, w)


class CoupledSampler:
    """Stage-ordered generator of ``Y_up`` and ``Y_down`` for a batch of traces.

    Up columns are drawn lazily on first request; :meth:`down` for stage
    ``tau`` reads only up columns ``<= mu_inv`` of the latest regular stage
    ``<= tau``. ``access_log`` records ``(tau, highest up column read)``.
    """

    def __init__(self, rates: CouplingRates, cal: MilestoneCalendar, rng, size: int):
        self.rates = rates
        self.cal = cal
        self.rng = rng
        self.size = size
        self.n = rates.p_up.shape[0]
        self.up_cols: list[np.ndarray] = []
        self.next_down = 1
        self.any_down = np.zeros((size, self.n), dtype=bool)
        self.window_up = np.zeros((size, self.n), dtype=bool)
        self.access_log: list[tuple[int, int]] = []
        self._read = 0

    def up(self, s: int) -> np.ndarray:
        while len(self.up_cols) < s:
            self.up_cols.append(self.rng.random((self.size, self.n)) < self.rates.p_up)
        self._read = max(self._read, s)
        return self.up_cols[s - 1]

    def down(self, tau: int) -> np.ndarray:
        if tau != self.next_down:
            raise ValidationError(f"down stages must be generated in order; expected {self.next_down}")
        self.next_down += 1
        self._read = 0
        cal = self.cal
        if cal.is_milestone(tau):
            k = cal.milestone_index(tau)
            w = self.rng.random((self.size, self.n)) < self.rates.w[cal.window_gap(k)]
            v = self.rng.random((self.size, self.n)) < self.rates.p_down
            y = np.where(self.any_down, v, w | self.window_up)
            self.window_up[:] = False
        else:
            yu = self.up(cal.mu_inv[tau])
            z = self.rng.random((self.size, self.n)) < self.rates.z
            y = yu & z
            self.window_up |= yu
        self.any_down |= y
        self.access_log.append((tau, self._read))
        return y


@dataclass
class CoupledTrace:
    """Indicator arrays with shape ``(traces, n, stages)``; stage ``s`` is column ``s - 1``."""

    y_up: np.ndarray
    y_down: np.ndarray

    def invariant_violations(self, cal: MilestoneCalendar) -> int:
        """Count breaches of the two deterministic implications of the coupling."""
        bad = 0
        yu, yd = self.y_up, self.y_down
        seen = np.zeros(yd.shape[:2], dtype=bool)
        window = np.zeros(yd.shape[:2], dtype=bool)
        for tau in range(1, yd.shape[2] + 1):
            col = yd[:, :, tau - 1]
            if cal.is_milestone(tau):
                bad += int((window & ~seen & ~col).sum())
                window[:] = False
            else:
                up = yu[:, :, cal.mu_inv[tau] - 1]
                bad += int((col & ~up).sum())
                window |= up
            seen |= col
        return bad


def sample_coupled(rounded, cal: MilestoneCalendar, rng, traces: int = 1) -> CoupledTrace:
    """Draw coupled indicator matrices for ``cal.horizon`` up stages."""
    p_up, p_down = _pairs(rounded)
    sampler = CoupledSampler(CouplingRates.build(p_up, p_down, cal), cal, rng, traces)
    downs = [sampler.down(tau) for tau in range(1, cal.down_horizon + 1)]
    ups = [sampler.up(s) for s in range(1, cal.horizon + 1)]
    return CoupledTrace(np.stack(ups, axis=2), np.stack(downs, axis=2))


def _pairs(rounded):
    if hasattr(rounded, "p_up"):
        return list(rounded.p_up), list(rounded.p_down)
    p_up, p_down = rounded
    return list(p_up), list(p_down)


# -- marginal verification ---------------------------------------------------------


@dataclass
class MarginalReport:
    passed: int = 0
    failed: int = 0
    failures: list = field(default_factory=list)
    invariant_violations: int = 0
    anticipations: int = 0

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.invariant_violations == 0 and self.anticipations == 0

    def to_dict(self) -> dict:
        return {"pass": self.passed, "fail": self.failed}

    def record(self, label, hits, count, p, z=4.0):
        if count == 0:
            return
        freq = hits / count
        sd = math.sqrt(p * (1.0 - p) / count)
        if abs(freq - p) <= z * sd + 1e-12:
            self.passed += 1
        else:
            self.failed += 1
            self.failures.append({"cell": label, "freq": freq, "p": p, "count": int(count)})


def verify_marginals(rounded, cal: MilestoneCalendar, traces: int, seed: int = 0,
                     min_bucket: int = 1000) -> MarginalReport:
    """Frequency tests of both indicator matrices against their nominal rates.

    Besides the per-cell test of ``Y_down`` and ``Y_up``, ``Y_down[i, tau]`` is
    tested conditionally on whether ``i`` already had a down indicator and on
    ``Y_down[i, tau - 1]``; buckets with fewer than ``min_bucket`` traces are
    skipped.
    """
    if traces < 1:
        raise ValidationError("traces must be >= 1")
    p_up, p_down = _pairs(rounded)
    rates = CouplingRates.build(p_up, p_down, cal)
    n = len(p_up)
    td, tu = cal.down_horizon, cal.horizon
    down_hits = np.zeros((n, td))
    up_hits = np.zeros((n, tu))
    cond_hits = np.zeros((n, td, 2, 2))
    cond_count = np.zeros((n, td, 2, 2))
    report = MarginalReport()
    for b, size in blocks(traces):
        sampler = CoupledSampler(rates, cal, stream(seed, COUPLING, b), size)
        seen = np.zeros((size, n), dtype=bool)
        last = np.zeros((size, n), dtype=bool)
        for tau in range(1, td + 1):
            y = sampler.down(tau)
            down_hits[:, tau - 1] += y.sum(axis=0)
            if tau > 1:
                for a in (0, 1):
                    for c in (0, 1):
                        sel = (seen == bool(a)) & (last == bool(c))
                        cond_count[:, tau - 1, a, c] += sel.sum(axis=0)
                        cond_hits[:, tau - 1, a, c] += (sel & y).sum(axis=0)
            seen |= y
            last = y
        for s in range(1, tu + 1):
            up_hits[:, s - 1] += sampler.up(s).sum(axis=0)
        for tau, read in sampler.access_log:
            if read > max((cal.mu_inv[s] for s in range(1, tau + 1)), default=0):
                report.anticipations += 1
    for i in range(n):
        for tau in range(1, td + 1):
            report.record(("down", i, tau), down_hits[i, tau - 1], traces, p_down[i])
            for a in (0, 1):
                for c in (0, 1):
                    cnt = cond_count[i, tau - 1, a, c]
                    if cnt >= min_bucket:
                        report.record(("down|prefix", i, tau, a, c), cond_hits[i, tau - 1, a, c], cnt, p_down[i])
        for s in range(1, tu + 1):
            report.record(("up", i, s), up_hits[i, s - 1], traces, p_up[i])
    check = sample_coupled((p_up, p_down), cal, stream(seed, COUPLING, 1 << 30), traces=min(traces, 2000))
    report.invariant_violations = check.invariant_violations(cal)
    return report


# -- mimicking policy --------------------------------------------------------------


class MilestoneInvariantBroken(AssertionError):
    pass


def _mimic_block(base: Policy, rewards, rates, cal, size, rng, base_horizon):
    n = rates.p_up.shape[0]
    sampler = CoupledSampler(rates, cal, rng, size)
    full = full_mask(n)
    avail_up = np.full(size, full, dtype=np.int64)
    avail_down = np.full(size, full, dtype=np.int64)
    bstate = base.batch_initial_state(size)
    snapshot = avail_up.copy()
    total = np.zeros(size)
    one = np.int64(1)

    def base_act(tau, state):
        a, state = base.batch_act(tau, avail_down, state, None)
        return np.where(avail_down != 0, a, -1), state

    tau = 1
    for t in range(1, cal.horizon + 1):
        target = cal.mu[t]
        if target > base_horizon:
            break
        while tau < target:
            a, bstate = base_act(tau, bstate)
            served = a >= 0
            avail_down[served] &= ~np.left_shift(one, a[served])
            avail_down &= ~pack_rows(sampler.down(tau))
            tau += 1
        if target == cal.previous_milestone(target) + 1:
            snapshot = avail_up.copy()
        a, bstate = base_act(target, bstate)
        served = a >= 0
        if served.any():
            sa = a[served]
            bit = np.left_shift(one, sa)
            if ((snapshot[served] & bit) == 0).any():
                raise MilestoneInvariantBroken(f"served customer absent at window start (stage {target})")
            hit = (avail_up[served] & bit) != 0
            idx = np.flatnonzero(served)[hit]
            total[idx] += rewards[sa[hit]]
            avail_up[idx] &= ~bit[hit]
            avail_down[served] &= ~bit
        avail_up &= ~pack_rows(sampler.up(t))
        avail_down &= ~pack_rows(sampler.down(target))
        tau = target + 1
    return total


def mimic_policy_reward(base_down_policy: Policy, rounded, eps: float, gamma: int,
                        episodes: int, seed: int = 0, rewards=None) -> SimResult:
    """Reward of the milestone-skipping mimic of ``base_down_policy`` in the up process.

    ``base_down_policy`` must support batched decisions and be deterministic.
    """
    if not base_down_policy.supports_batch:
        raise ValidationError("the base policy must support batched decisions")
    p_up, p_down = _pairs(rounded)
    n = len(p_up)
    if rewards is None:
        rewards = rounded.base.rewards
    rewards = np.asarray(rewards, dtype=float)
    horizon = base_down_policy.horizon
    cal = build_calendar(eps, gamma, max(horizon, 1))
    rates = CouplingRates.build(p_up, p_down, cal)
    totals = [
        _mimic_block(base_down_policy, rewards, rates, cal, size, stream(seed, COUPLING, b, gamma), horizon)
        for b, size in blocks(episodes)
    ]
    return SimResult.from_totals(np.concatenate(totals), seed)


@dataclass(frozen=True)
class GammaSweep:
    results: tuple[SimResult, ...]

    @property
    def mean(self) -> float:
        return float(np.mean([r.mean_reward for r in self.results]))

    @property
    def stderr(self) -> float:
        return math.sqrt(sum(r.stderr**2 for r in self.results)) / len(self.results)

    @property
    def best_gamma(self) -> int:
        vals = [r.mean_reward for r in self.results]
        return int(np.argmax(vals)) + 1

    def table(self) -> list[dict]:
        return [{"gamma": g, "mean": r.mean_reward, "stderr": r.stderr}
                for g, r in enumerate(self.results, start=1)]


def gamma_sweep(base_down_policy: Policy, rounded, eps: float, episodes: int, seed: int = 0,
                rewards=None) -> GammaSweep:
    period = inverse_epsilon(eps)
    return GammaSweep(tuple(
        mimic_policy_reward(base_down_policy, rounded, eps, g, episodes, seed, rewards)
        for g in range(1, period + 1)))


def milestone_skipping_value(inst: Instance, pol: Policy, eps: float, gamma: int) -> float:
    """Exact reward of ``pol`` counting only its services on regular stages.

    With equal up and down probabilities this is exactly what the mimic earns.
    """
    cal = build_calendar(eps, gamma, max(pol.horizon, 1))
    _, stage_rewards = stage_distributions(inst, pol, pol.horizon)
    return sum(v for tau, v in enumerate(stage_rewards, start=1) if not cal.is_milestone(tau))


# -- elimination transfer ------------------------------------------------------------


def elimination_probs(p_minus: Sequence[float], p_plus: Sequence[float]) -> list[float]:
    out = []
    for i, (a, b) in enumerate(zip(p_minus, p_plus)):
        if not 0.0 <= a <= b < 1.0:
            raise ProbOrderViolated(i)
        out.append((b - a) / (1.0 - a))
    if len(p_minus) != len(p_plus):
        raise ValidationError("probability lists differ in length")
    return out


class EliminationPolicy(Policy):
    """Run ``inner`` while hiding each customer at a per-stage rate.

    State is ``(eliminated, inner_state)``. When simulated, hidden customers
    are drawn after every stage; in exact mode the hiding rates are reported
    through :meth:`removal_probs` and ``eliminated`` stays empty.
    """

    randomized = True

    def __init__(self, inner: Policy, p_minus: Sequence[float], p_plus: Sequence[float]):
        self.inner = inner
        self.q = elimination_probs(p_minus, p_plus)
        self.q_arr = np.asarray(self.q)
        self.n = len(self.q)
        self.horizon = inner.horizon
        self.supports_batch = inner.supports_batch

    def initial_state(self):
        return (0, self.inner.initial_state())

    def act(self, t, avail, state, rng=None):
        gone, inner_state = state
        a, inner_state = self.inner.act(t, avail & ~gone, inner_state, rng)
        if rng is not None:
            picks = rng.random(self.n) < self.q_arr
            for i in np.flatnonzero(picks):
                gone |= 1 << int(i)
        return a, (gone, inner_state)

    def removal_probs(self, t, state):
        inner = self.inner.removal_probs(t, state[1])
        if inner is None:
            return self.q
        return [1.0 - (1.0 - a) * (1.0 - b) for a, b in zip(self.q, inner)]

    def ignored(self, t, state):
        return self.inner.ignored(t, state[1])

    def batch_initial_state(self, size):
        return (np.zeros(size, dtype=np.int64), self.inner.batch_initial_state(size))

    def batch_act(self, t, avail, state, rng):
        gone, inner_state = state
        a, inner_state = self.inner.batch_act(t, avail & ~gone, inner_state, rng)
        gone = gone | departure_masks(rng.random((avail.shape[0], self.n)), self.q_arr)
        return a, (gone, inner_state)


def eliminate_transfer(pol: Policy, p_minus: Sequence[float], p_plus: Sequence[float]) -> EliminationPolicy:
    """Policy for departure rates ``p_minus`` earning what ``pol`` earns under ``p_plus``."""
    return EliminationPolicy(pol, p_minus, p_plus)


@dataclass
class EliminationReport:
    max_diff: list[float]
    tol: float

    @property
    def ok(self) -> bool:
        return all(d <= self.tol for d in self.max_diff)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "max_diff": self.max_diff}


def elimination_visible_distributions(p_minus, p_plus, pol: Policy, t_max: int) -> list[dict]:
    """Law of "present and not hidden" customers, tracking presence and hiding jointly.

    Each present customer independently departs, stays hidden or stays
    visible; hidden customers may still depart.
    """
    n = len(p_minus)
    q = elimination_probs(p_minus, p_plus)
    layer = {(full_mask(n), 0, pol.initial_state()): 1.0}
    out = []
    for t in range(1, t_max + 1):
        marg = defaultdict(float)
        nxt = defaultdict(float)
        for (avail, gone, state), w in layer.items():
            marg[avail & ~gone] += w
            a, nstate = None, state
            if avail & ~gone and t <= pol.horizon:
                a, nstate = pol.act(t, avail & ~gone, state, None)
            rem = avail if a is None else avail & ~(1 << a)
            branches = []
            for i in range(n):
                if not rem >> i & 1:
                    branches.append([(0, 0, 1.0)])
                elif gone >> i & 1:
                    branches.append([(0, 1, p_minus[i]), (1, 1, 1.0 - p_minus[i])])
                else:
                    stay = 1.0 - p_minus[i]
                    branches.append([(0, 0, p_minus[i]), (1, 1, stay * q[i]), (1, 0, stay * (1.0 - q[i]))])
            for combo in itertools.product(*branches):
                pr = w
                na = ng = 0
                for i, (present, hidden, pi) in enumerate(combo):
                    pr *= pi
                    if present:
                        na |= 1 << i
                        if hidden:
                            ng |= 1 << i
                if pr > 0.0:
                    nxt[(na, ng, nstate)] += pr
        out.append(dict(marg))
        layer = nxt
    return out


def verify_elimination_distribution(p_minus, p_plus, pol: Policy, t_max: int, tol: float = 1e-9,
                                    cap: int = ELIMINATION_CAP) -> EliminationReport:
    n = len(p_minus)
    if n > cap:
        raise InstanceTooLarge(n, cap)
    hidden = elimination_visible_distributions(p_minus, p_plus, pol, t_max)
    plain, _ = stage_distributions(Instance((0.0,) * n, tuple(p_plus)), pol, t_max)
    diffs = []
    for a, b in zip(hidden, plain):
        keys = set(a) | set(b)
        diffs.append(max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys))
    return EliminationReport(diffs, tol)
