"""Acceptance suite: ten end-to-end checks with their tolerances and time budgets.

Each check prints one ``[criterion k] PASS|FAIL`` line. Run with
``pytest tests/test_acceptance.py -s`` or directly as a script.
"""

import contextlib
import io
import math
import os
import tempfile
import time

import numpy as np
import pytest
from conftest import few_pairs_instance, mixed_instance, prerounded_instance

from impatient.class_dp import as_customer_policy, build_classes, solve_class_dp
from impatient.cli import main
from impatient.coupling import (
    MilestoneInvariantBroken,
    build_calendar,
    eliminate_transfer,
    gamma_sweep,
    verify_elimination_distribution,
    verify_marginals,
)
from impatient.exact import brute_force_enum, solve_exact
from impatient.instance import Instance, random_instance, serialize_instance
from impatient.pipeline import solve_qptas
from impatient.policy import evaluate_policy_exact, priority_policy, simulate_policy
from impatient.preprocess import build_class_ordered
from impatient.rounding import check_long_horizon, check_short_horizon, reward_sandwich_check, round_instance, round_probs, rounding_grid


def criterion_1():
    g = np.random.default_rng(1)
    worst = 0.0
    for k in range(60):
        inst = random_instance(1 + k % 4, (0.0, 10.0), (0.0, 1.0), seed=int(g.integers(2**31)))
        worst = max(worst, abs(brute_force_enum(inst) - solve_exact(inst).opt_value))
    return worst <= 1e-12, f"60 instances, max |brute - dp| = {worst:.2e}"


def criterion_2():
    g = np.random.default_rng(2)
    worst = 0.0
    for k in range(36):
        inst = few_pairs_instance(int(g.integers(1, 11)), g, pairs=1 + k % 3)
        table = build_classes(inst)
        sol = solve_class_dp(table)
        opt = solve_exact(inst).opt_value
        induced = evaluate_policy_exact(inst, as_customer_policy(sol, table))
        worst = max(worst, abs(sol.opt_value - opt), abs(induced - opt))
    return worst <= 1e-9, f"36 instances, max deviation = {worst:.2e}"


def criterion_3():
    checked = bad = 0
    for eps in (0.25, 0.2, 0.1):
        for n in (5, 10, 20):
            grid = rounding_grid(n, eps, 41)
            up, down = round_probs(Instance((1.0,) * len(grid), tuple(grid.tolist())), eps, n_ref=n)
            for a, b in zip(up, down):
                for rep in (check_short_horizon(a, b, eps), check_long_horizon(a, b, eps)):
                    checked += 1
                    bad += len(rep.violations)
    return bad == 0, f"{checked} pair checks, {bad} violations"


def criterion_4():
    g = np.random.default_rng(4)
    failures = checked = 0
    for k in range(32):
        n = 1 + k % 6
        eps = (0.2, 0.1, 0.05)[k % 3]
        inst = random_instance(n, (0.0, 10.0), (0.0, 1.0), seed=int(g.integers(2**31)))
        sol = solve_exact(inst)
        pols = [sol.policy()] + [priority_policy(g.permutation(n).tolist()) for _ in range(3)]
        for pol in pols:
            checked += 1
            failures += not reward_sandwich_check(inst, eps, pol, sol.opt_value).holds(1e-9)
    return failures == 0, f"{checked} (instance, policy) pairs, {failures} violations"


def criterion_5():
    inst = random_instance(6, (0.0, 10.0), (0.01, 0.95), seed=5)
    ri = round_instance(inst, 0.25)
    notes = []
    for seed in (1, 2):
        ok = True
        for gamma in range(1, 5):
            cal = build_calendar(0.25, gamma, 6)
            rep = verify_marginals(ri, cal, 100_000, seed=seed)
            ok &= rep.ok
            notes.append(f"seed {seed} gamma {gamma}: {rep.passed} pass / {rep.failed} fail")
        if ok:
            return True, "; ".join(notes)
    return False, "; ".join(notes)


def criterion_6():
    eps = 0.25
    worst = math.inf
    fired = 0
    count = 0
    for k in range(10):
        n = 2 + k % 5
        inst = random_instance(n, (0.0, 10.0), (eps / n**2, 1 - eps / n), seed=600 + k)
        ri = round_instance(inst, eps)
        down = solve_exact(inst, probs=ri.p_down)
        try:
            sweep = gamma_sweep(down.policy(), ri, eps, 100_000, seed=k)
        except MilestoneInvariantBroken:
            fired += 1
            continue
        count += 1
        bound = (1 - 2 * eps) * down.opt_value
        if down.opt_value > 0:
            worst = min(worst, (sweep.mean + 4 * sweep.stderr - bound) / down.opt_value)
    ok = fired == 0 and count == 10 and worst >= 0
    return ok, f"{count} instances, min slack/opt = {worst:.4f}, milestone assertions fired: {fired}"


def criterion_7():
    g = np.random.default_rng(7)
    worst_dist = 0.0
    for k in range(12):
        n = 1 + k % 5
        pm = g.uniform(0.0, 0.7, n)
        pp = pm + g.uniform(0.0, 1.0, n) * (0.95 - pm)
        inst = Instance(tuple(g.uniform(0, 10, n).tolist()), tuple(pp.tolist()))
        pol = solve_exact(inst).policy() if k % 2 else priority_policy(range(n))
        rep = verify_elimination_distribution(pm.tolist(), pp.tolist(), pol, n + 1)
        worst_dist = max(worst_dist, max(rep.max_diff))
    zs = []
    for k in range(3):
        n = 3 + k
        pm = g.uniform(0.0, 0.6, n)
        pp = pm + g.uniform(0.0, 1.0, n) * (0.9 - pm)
        rewards = tuple(g.uniform(0, 10, n).tolist())
        sol = solve_exact(Instance(rewards, tuple(pp.tolist())))
        tr = eliminate_transfer(sol.policy(), pm.tolist(), pp.tolist())
        res = simulate_policy(Instance(rewards, tuple(pm.tolist())), tr, 1_000_000, seed=70 + k)
        zs.append((res.mean_reward - sol.opt_value) / res.stderr)
    ok = worst_dist <= 1e-9 and all(abs(z) <= 4 for z in zs)
    return ok, f"max distribution gap {worst_dist:.2e}; MC z-scores {', '.join(f'{z:+.2f}' for z in zs)}"


def criterion_8():
    eps = 0.2
    g = np.random.default_rng(8)
    worst = low = math.inf
    for k in range(22):
        n = 1 + k % 8
        if k % 2:
            inst = mixed_instance(n, eps, g)
        else:
            inst = random_instance(n, (0.0, 10.0), (eps / n**2, 1 - eps / n), seed=800 + k)
        rep = solve_qptas(inst, eps, seed=1)
        worst = min(worst, rep.ratio + 4 * rep.stderr - (1 - 12 * eps))
        low = min(low, rep.ratio)
    exact_dev = 0.0
    for k in range(6):
        rep = solve_qptas(prerounded_instance(3 + k, eps, g), eps)
        exact_dev = max(exact_dev, abs(rep.ratio - 1.0))
    ok = worst >= 0 and exact_dev <= 1e-9
    return ok, f"22 instances, min ratio {low:.4f} (bound {1 - 12 * eps:.2f}); prerounded max |ratio-1| {exact_dev:.1e}"


def criterion_9():
    g = np.random.default_rng(9)
    low = math.inf
    bad = 0
    for eps in (0.1, 0.2):
        for k in range(20):
            inst = mixed_instance(1 + k % 8, eps, g)
            opt = solve_exact(inst).opt_value
            val = evaluate_policy_exact(inst, build_class_ordered(inst, eps))
            bad += val < (1 - 6 * eps) * opt - 1e-9
            if opt > 0:
                low = min(low, val / opt)
    return bad == 0, f"40 instances, {bad} violations, min ratio {low:.4f}"


def _cli_output(argv):
    buf, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, buf.getvalue().encode()


def criterion_10():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "inst.json")
        with open(path, "w") as fh:
            fh.write(serialize_instance(random_instance(6, (0, 10), (0.02, 0.9), seed=10)))
        runs = [
            ["solve-exact", "-i", path, "--dump-policy"],
            ["solve-qptas", "-i", path, "--dump-class-policy"],
            ["solve-qptas", "-i", path, "--exact-cap", "4", "--episodes", "5000", "--seed", "3"],
            ["simulate", "-i", path, "--episodes", "20000", "--seed", "5"],
            ["couple", "-i", path, "--episodes", "5000", "--traces", "5000", "--seed", "6"],
            ["verify", "--seed", "2"],
            ["random", "--n", "7", "--seed", "4"],
            ["classify", "-i", path],
            ["round", "-i", path, "--format", "csv"],
        ]
        same = 0
        for argv in runs:
            a, b = _cli_output(argv), _cli_output(argv)
            same += a == b and a[0] in (0, 1) and len(a[1]) > 0
    return same == len(runs), f"{same}/{len(runs)} commands byte-identical"


CRITERIA = {
    1: (criterion_1, 10),
    2: (criterion_2, 60),
    3: (criterion_3, 5),
    4: (criterion_4, 60),
    5: (criterion_5, 120),
    6: (criterion_6, 600),
    7: (criterion_7, 300),
    8: (criterion_8, 900),
    9: (criterion_9, 300),
    10: (criterion_10, 600),
}


def run_criterion(k):
    fn, budget = CRITERIA[k]
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    ok = bool(ok) and elapsed < budget
    line = f"[criterion {k}] {'PASS' if ok else 'FAIL'} {detail} ({elapsed:.1f}s of {budget}s)"
    return ok, line


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    ok, line = run_criterion(k)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(k) for k in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
