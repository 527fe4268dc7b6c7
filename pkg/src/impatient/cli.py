"""Command-line front end.

Every command prints one JSON (or flat CSV) document on stdout; diagnostics
go to stderr. Exit codes: 0 success, 1 verification failure, 2 invalid input,
3 capacity exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass

from .class_dp import STATE_BUDGET, build_classes, solve_class_dp
from .coupling import build_calendar, gamma_sweep, reciprocal_epsilon, verify_marginals
from .exact import solve_exact
from .exceptions import CapacityError, ValidationError
from .instance import AccuracyParams, instance_to_dict, load_instance, random_instance
from .pipeline import solve_qptas
from .policy import EXACT_CAP, priority_policy, simulate_policy
from .preprocess import classify
from .rounding import round_instance
from .suites import SUITES, load_fixture, run_suites

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_CAPACITY = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    command: str
    instance: str | None
    epsilon: float
    seed: int
    episodes: int
    exact_cap: int
    state_budget: int
    fmt: str
    workers: int

    def __post_init__(self):
        AccuracyParams(self.epsilon)
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        for name in ("episodes", "exact_cap", "state_budget", "workers"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name.replace('_', '-')} must be positive")


def _flatten(doc, prefix=""):
    if isinstance(doc, dict):
        for k, v in doc.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(doc, list):
        for k, v in enumerate(doc):
            yield from _flatten(v, f"{prefix}{k}.")
    else:
        yield prefix[:-1], doc


def render(doc: dict, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for k, v in _flatten(doc):
            writer.writerow([k, json.dumps(v)])
        return buf.getvalue()
    return json.dumps(doc) + "\n"


def _need_instance(args):
    if not args.instance:
        raise ValidationError("an instance file is required (-i/--instance)")
    try:
        return load_instance(args.instance)
    except OSError as exc:
        raise ValidationError(f"cannot read {args.instance}: {exc.strerror}") from None


def run_solve_exact(cfg, args) -> tuple[int, dict]:
    inst = _need_instance(args)
    sol = solve_exact(inst, cap=cfg.exact_cap)
    doc = sol.to_dict(dump_policy=args.dump_policy)
    doc["n"] = inst.n
    return EXIT_OK, doc


def run_solve_qptas(cfg, args) -> tuple[int, dict]:
    inst = _need_instance(args)
    rep = solve_qptas(inst, cfg.epsilon, cap=cfg.exact_cap, episodes=cfg.episodes,
                      seed=cfg.seed, state_budget=cfg.state_budget)
    doc = rep.to_dict()
    if args.dump_class_policy:
        cls = classify(inst, cfg.epsilon)
        idx = [i for i in range(inst.n) if cls.average >> i & 1]
        if idx:
            ri = round_instance(inst.subinstance(idx), cfg.epsilon, n_ref=inst.n)
            table = build_classes(ri.rounded_rewards, ri.p_up)
            sol = solve_class_dp(table, cfg.state_budget)
            dump = sol.to_dict()
            for c in dump["classes"]:
                c["members"] = [idx[k] for k in c["members"]]
            doc["class_policy"] = dump
        else:
            doc["class_policy"] = None
    return EXIT_OK, doc


def run_verify(cfg, args) -> tuple[int, dict]:
    names = list(SUITES) if args.suite is None else args.suite
    fixture = load_fixture(args.elimination_fixture) if args.elimination_fixture else None
    ok, results = run_suites(names, cfg.seed, fixture)
    for name, res in results.items():
        print(f"{name}: {'pass' if res['ok'] else 'FAIL'}", file=sys.stderr)
    return (EXIT_OK if ok else EXIT_VERIFY), {"ok": ok, "suites": results}


def run_couple(cfg, args) -> tuple[int, dict]:
    inst = _need_instance(args)
    eps = reciprocal_epsilon(cfg.epsilon)
    ri = round_instance(inst, eps)
    down = solve_exact(inst, cap=cfg.exact_cap, probs=ri.p_down)
    base = down.policy()
    cal = build_calendar(eps, 1, inst.n)
    marg = verify_marginals(ri, cal, args.traces, cfg.seed)
    sweep = gamma_sweep(base, ri, eps, cfg.episodes, cfg.seed)
    rhs = (1.0 - 2.0 * eps) * down.opt_value
    ok = marg.ok and sweep.mean >= rhs - 4.0 * sweep.stderr
    doc = {
        "epsilon": eps,
        "marginals": marg.to_dict(),
        "theorem2": {"lhs": sweep.mean, "rhs": rhs, "stderr": sweep.stderr},
        "gamma_table": sweep.table(),
        "best_gamma": sweep.best_gamma,
    }
    return (EXIT_OK if ok else EXIT_VERIFY), doc


def run_simulate(cfg, args) -> tuple[int, dict]:
    inst = _need_instance(args)
    if args.ordering:
        pol = priority_policy([int(x) for x in args.ordering.split(",")])
    else:
        pol = solve_exact(inst, cap=cfg.exact_cap).policy()
    return EXIT_OK, simulate_policy(inst, pol, cfg.episodes, cfg.seed).to_dict()


def run_random(cfg, args) -> tuple[int, dict]:
    inst = random_instance(args.n, tuple(args.reward_range), tuple(args.prob_range), cfg.seed)
    return EXIT_OK, instance_to_dict(inst)


def run_classify(cfg, args) -> tuple[int, dict]:
    return EXIT_OK, classify(_need_instance(args), cfg.epsilon).to_dict()


def run_round(cfg, args) -> tuple[int, dict]:
    return EXIT_OK, round_instance(_need_instance(args), cfg.epsilon).to_dict()


COMMANDS = {
    "solve-exact": run_solve_exact,
    "solve-qptas": run_solve_qptas,
    "verify": run_verify,
    "couple": run_couple,
    "simulate": run_simulate,
    "random": run_random,
    "classify": run_classify,
    "round": run_round,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-i", "--instance", help="instance JSON file")
    common.add_argument("--epsilon", type=float, default=0.2, help="accuracy in (0, 1/4)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--episodes", type=int, default=20000, help="Monte Carlo episodes")
    common.add_argument("--exact-cap", type=int, default=EXACT_CAP, help="largest n solved exactly")
    common.add_argument("--state-budget", type=int, default=STATE_BUDGET, help="class DP state budget")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, default=1, help="accepted for compatibility; runs serially")

    parser = argparse.ArgumentParser(prog="impatient", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve-exact", parents=[common], help="exact optimum")
    p.add_argument("--dump-policy", action="store_true")
    p = sub.add_parser("solve-qptas", parents=[common], help="approximation pipeline")
    p.add_argument("--dump-class-policy", action="store_true")
    p = sub.add_parser("verify", parents=[common], help="run self-check suites")
    p.add_argument("--suite", nargs="*", default=None, help=f"subset of: {', '.join(SUITES)}")
    p.add_argument("--elimination-fixture", help="JSON with p_minus, p_plus and optional t_max")
    p = sub.add_parser("couple", parents=[common], help="coupling experiment on an all-average instance")
    p.add_argument("--traces", type=int, default=20000)
    p = sub.add_parser("simulate", parents=[common], help="simulate the optimal or a priority policy")
    p.add_argument("--ordering", help="comma-separated priority order; default is the exact optimum")
    p = sub.add_parser("random", parents=[common], help="draw a random instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reward-range", type=float, nargs=2, default=(0.0, 1.0))
    p.add_argument("--prob-range", type=float, nargs=2, default=(0.0, 1.0))
    sub.add_parser("classify", parents=[common], help="sticker / quitter / average split")
    sub.add_parser("round", parents=[common], help="rounded rewards and probabilities")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = RunConfig(args.command, args.instance, args.epsilon, args.seed, args.episodes,
                        args.exact_cap, args.state_budget, args.format, args.workers)
        code, doc = COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapacityError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    sys.stdout.write(render(doc, cfg.fmt))
    return code


if __name__ == "__main__":
    sys.exit(main())
