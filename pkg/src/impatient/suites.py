"""Self-check suites behind ``impatient verify``."""

from __future__ import annotations

import json

from .class_dp import as_customer_policy, build_classes, solve_class_dp
from .coupling import build_calendar, verify_elimination_distribution, verify_marginals
from .exact import brute_force_enum, solve_exact
from .exceptions import ImpatientError, ValidationError
from .instance import Instance, random_instance
from .policy import evaluate_policy_exact, priority_policy
from .rounding import check_long_horizon, check_short_horizon, round_probs, rounding_grid

DEFAULT_ELIMINATION = {"p_minus": [0.1, 0.2, 0.3], "p_plus": [0.3, 0.4, 0.5], "t_max": 3}


def suite_rounding(seed):
    checked = bad = 0
    for eps in (0.25, 0.2, 0.1):
        for n in (5, 10, 20):
            grid = rounding_grid(n, eps)
            up, down = round_probs(Instance((1.0,) * len(grid), tuple(grid)), eps, n_ref=n)
            for a, b in zip(up, down):
                for rep in (check_short_horizon(a, b, eps), check_long_horizon(a, b, eps)):
                    checked += 1
                    bad += not rep.ok
    return bad == 0, {"pairs_checked": checked, "violations": bad}


def suite_calendar(seed):
    bad = 0
    for period in (2, 3, 4, 5):
        eps = 1.0 / period
        cals = [build_calendar(eps, g, 40) for g in range(1, period + 1)]
        for cal in cals:
            for t in range(1, cal.horizon + 1):
                tau = cal.mu[t]
                before = sum(1 for m in cal.milestones if m < tau)
                bad += cal.is_milestone(tau) or tau - t != before or cal.mu_inv[tau] != t
        for tau in range(1, 41):
            bad += sum(c.is_milestone(tau) for c in cals) != 1
    return bad == 0, {"violations": bad}


def suite_exact(seed):
    worst = 0.0
    for k in range(10):
        inst = random_instance(1 + k % 4, (0.0, 10.0), (0.0, 1.0), seed=seed + k)
        worst = max(worst, abs(brute_force_enum(inst) - solve_exact(inst).opt_value))
    return worst <= 1e-12, {"max_abs_diff": worst}


def suite_class_dp(seed):
    worst = 0.0
    pairs = [(4.0, 0.3), (2.0, 0.1), (1.0, 0.6)]
    for k in range(6):
        n = 3 + k
        inst = Instance.from_pairs([pairs[(i * (k + 1)) % 3] for i in range(n)])
        table = build_classes(inst)
        sol = solve_class_dp(table)
        opt = solve_exact(inst).opt_value
        induced = evaluate_policy_exact(inst, as_customer_policy(sol, table))
        worst = max(worst, abs(sol.opt_value - opt), abs(induced - opt))
    return worst <= 1e-9, {"max_abs_diff": worst}


def suite_marginals(seed):
    cal = build_calendar(0.25, 2, 4)
    rep = verify_marginals(([0.100392, 0.55, 0.3], [0.0994, 0.5, 0.3]), cal, 20000, seed)
    return rep.ok, {"pass": rep.passed, "fail": rep.failed, "failures": rep.failures[:5]}


def suite_elimination(seed, fixture=None):
    doc = DEFAULT_ELIMINATION if fixture is None else fixture
    p_minus, p_plus = list(doc["p_minus"]), list(doc["p_plus"])
    if len(p_minus) != len(p_plus):
        raise ValidationError("p_minus and p_plus differ in length")
    pol = priority_policy(range(len(p_minus)))
    rep = verify_elimination_distribution(p_minus, p_plus, pol, int(doc.get("t_max", 3)))
    return rep.ok, rep.to_dict()


SUITES = {
    "rounding": suite_rounding,
    "calendar": suite_calendar,
    "exact": suite_exact,
    "class-dp": suite_class_dp,
    "marginals": suite_marginals,
    "elimination": suite_elimination,
}


def run_suites(names, seed: int = 0, elimination_fixture=None) -> tuple[bool, dict]:
    """Run the named suites; a suite that raises a package error counts as failed."""
    if not names:
        raise ValidationError("no verification suite selected")
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValidationError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    results = {}
    for name in names:
        try:
            if name == "elimination":
                ok, detail = suite_elimination(seed, elimination_fixture)
            else:
                ok, detail = SUITES[name](seed)
        except ImpatientError as exc:
            ok, detail = False, {"error": type(exc).__name__, "message": str(exc)}
        results[name] = {"ok": bool(ok), "detail": detail}
    return all(r["ok"] for r in results.values()), results


def load_fixture(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"cannot parse fixture: {exc.msg}") from None
