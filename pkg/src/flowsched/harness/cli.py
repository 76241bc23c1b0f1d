"""Command-line interface: ``flowsched {solve,oracle,gen,verify}``.

Exit codes: 0 when every requested schedule was produced, 2 when some run
ended without a schedule (the guess was too small or the binary search
found nothing), 1 on malformed input or any other usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any, Sequence

from flowsched.harness.generate import FAMILIES, GeneratorConfig, generate
from flowsched.harness.io import (
    dumps_instance,
    fraction_pair,
    load_instance,
    load_schedule,
    report_to_dict,
)
from flowsched.instance import InstanceError, InvalidScheduleError, makespan
from flowsched.numerics import make_params
from flowsched.oracle import DEFAULT_JOB_CAP, OracleRefusal, brute_force_opt
from flowsched.schedule import DomainError
from flowsched.search import SearchStats, TauTooSmall
from flowsched.solvers import (
    COMBINED,
    LOCAL_SEARCH,
    MATCHING,
    SolveReport,
    binary_search_solve,
    combined_solve,
    matching_solve,
    solve_with_tau,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_RESULT = 2
ZETA_ENV = "FLOWSCHED_ZETA"
DEFAULT_ZETA = Fraction(1, 10)


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with the input-error exit code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _default_zeta() -> Fraction:
    raw = os.environ.get(ZETA_ENV)
    if raw is None:
        return DEFAULT_ZETA
    try:
        return Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise SystemExit(f"flowsched: error: {ZETA_ENV}={raw!r} is not a rational number")


def _solve_one(path: str, method: str, zeta: Fraction, tau: Fraction | None, check: bool, timing: bool, seed: int | None) -> dict[str, Any]:
    """Solve a single instance file and return its report document."""
    out: dict[str, Any] = {"instance": path}
    try:
        inst = load_instance(path)
    except InstanceError as exc:
        return out | {"status": "input-error", "error": str(exc)}
    try:
        report: SolveReport | None
        reason = None
        if tau is not None:
            params = make_params(inst.epsilon, zeta)
            stats = SearchStats()
            try:
                sched = solve_with_tau(inst, tau, params, check_invariants=check, stats=stats)
            except TauTooSmall as exc:
                report, reason = None, exc.reason
            else:
                report = SolveReport(
                    sched,
                    makespan(inst, sched),
                    tau,
                    LOCAL_SEARCH,
                    {
                        "main_loop_iterations": stats.main_loop_iterations,
                        "layers_built": stats.layers_built,
                        "collapses": stats.collapses,
                        "monitor_checks": stats.monitor_checks,
                        "max_depth": stats.max_depth,
                        "violations": stats.violations,
                    },
                )
        elif method == LOCAL_SEARCH:
            report = binary_search_solve(inst, make_params(inst.epsilon, zeta), check_invariants=check, timing=timing)
            reason = "no guess in [1, 2) succeeded"
        elif method == MATCHING:
            report = matching_solve(inst, timing=timing)
        else:
            report = combined_solve(inst, zeta, check_invariants=check, timing=timing)
    except (DomainError, ValueError) as exc:
        return out | {"status": "input-error", "error": str(exc)}
    if report is None:
        return out | {"status": "no-result", "reason": reason}
    doc = out | {"status": "ok"} | report_to_dict(report)
    if seed is not None:
        doc["seed"] = seed
    return doc


def _format_text(doc: dict[str, Any]) -> str:
    lines = [f"instance: {doc['instance']}", f"status:   {doc['status']}"]
    if doc["status"] == "ok":
        num, den = doc["makespan"]
        lines.append(f"method:   {doc['method']}")
        lines.append(f"makespan: {Fraction(num, den)}")
        if doc["tau"] is not None:
            lines.append(f"tau:      {Fraction(*doc['tau'])}")
        for job, machine in doc["assignment"].items():
            lines.append(f"  {job} -> {machine}")
    elif doc["status"] == "no-result":
        lines.append(f"reason:   {doc['reason']}")
    else:
        lines.append(f"error:    {doc['error']}")
    return "\n".join(lines)


def cmd_solve(args: argparse.Namespace) -> int:
    if args.tau is not None and args.method != LOCAL_SEARCH:
        print("flowsched: error: --tau only applies to --method local-search", file=sys.stderr)
        return EXIT_INPUT
    if args.zeta <= 0:
        print("flowsched: error: --zeta must be positive", file=sys.stderr)
        return EXIT_INPUT
    jobs = [
        (path, args.method, args.zeta, args.tau, args.check_invariants, args.timing, args.seed)
        for path in args.instance
    ]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            docs = list(pool.map(_solve_one, *zip(*jobs)))
    else:
        docs = [_solve_one(*job) for job in jobs]
    if args.json:
        payload: Any = docs[0] if len(docs) == 1 else docs
        print(json.dumps(payload, indent=2))
    else:
        print("\n\n".join(_format_text(d) for d in docs))
    for d in docs:
        if d["status"] == "input-error":
            print(f"flowsched: {d['instance']}: {d['error']}", file=sys.stderr)
    statuses = {d["status"] for d in docs}
    if "input-error" in statuses:
        return EXIT_INPUT
    if "no-result" in statuses:
        return EXIT_NO_RESULT
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    try:
        inst = load_instance(args.instance)
        result = brute_force_opt(inst, job_cap=args.job_cap)
    except (InstanceError, OracleRefusal) as exc:
        print(f"flowsched: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.json:
        doc = {
            "instance": args.instance,
            "opt": fraction_pair(result.opt_makespan),
            "witness": dict(sorted(result.witness.assignment.items())),
        }
        print(json.dumps(doc, indent=2))
    else:
        print(f"OPT = {result.opt_makespan}")
        for job, machine in sorted(result.witness.assignment.items()):
            print(f"  {job} -> {machine}")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    config = GeneratorConfig(
        family=args.family,
        machines=args.machines,
        big=args.big,
        small=args.small,
        epsilon=args.epsilon,
        density=args.density,
        clusters=args.clusters,
        bridge=args.bridge,
        seed=args.seed,
    )
    try:
        text = dumps_instance(generate(config))
    except ValueError as exc:
        print(f"flowsched: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.out in (None, "-"):
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(args.out, "w") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"flowsched: error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        inst = load_instance(args.instance)
        sched, raw = load_schedule(args.schedule)
        value = makespan(inst, sched)
    except (InstanceError, InvalidScheduleError) as exc:
        print(f"invalid: {exc}")
        return EXIT_INPUT
    claimed = raw.get("makespan") if isinstance(raw, dict) else None
    if claimed is not None and Fraction(*claimed) != value:
        print(f"invalid: reported makespan {Fraction(*claimed)} differs from recomputed {value}")
        return EXIT_INPUT
    print(f"valid: makespan {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowsched", description="Two-size restricted assignment scheduling.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="schedule one or more instance files")
    solve.add_argument("--instance", action="append", required=True, help="instance JSON file (repeatable)")
    solve.add_argument("--method", choices=(LOCAL_SEARCH, MATCHING, COMBINED), default=COMBINED)
    solve.add_argument("--zeta", type=_fraction, default=None, help=f"slack parameter (default ${ZETA_ENV} or 1/10)")
    solve.add_argument("--tau", type=_fraction, default=None, help="pin the guess tau (local-search only)")
    solve.add_argument("--json", action="store_true", help="machine-readable report")
    solve.add_argument("--check-invariants", action="store_true", help="evaluate the search monitors every round")
    solve.add_argument("--seed", type=int, default=None, help="recorded in the report; the solvers are deterministic")
    solve.add_argument("--jobs", type=int, default=1, help="solve instance files in N worker processes")
    solve.add_argument("--timing", action="store_true", help="include wall-clock times in the report")
    solve.set_defaults(func=cmd_solve)

    oracle = sub.add_parser("oracle", help="exact optimum by exhaustive search")
    oracle.add_argument("--instance", required=True)
    oracle.add_argument("--job-cap", type=int, default=DEFAULT_JOB_CAP)
    oracle.add_argument("--json", action="store_true")
    oracle.set_defaults(func=cmd_oracle)

    gen = sub.add_parser("gen", help="write a generated instance")
    gen.add_argument("--family", choices=FAMILIES, default="uniform")
    gen.add_argument("--machines", type=int, default=4)
    gen.add_argument("--big", type=int, default=2)
    gen.add_argument("--small", type=int, default=6)
    gen.add_argument("--epsilon", type=_fraction, default=Fraction(1, 2))
    gen.add_argument("--density", type=float, default=0.5)
    gen.add_argument("--clusters", type=int, default=2)
    gen.add_argument("--bridge", type=float, default=0.3)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=None, help="output path ('-' or omitted for stdout)")
    gen.set_defaults(func=cmd_gen)

    verify = sub.add_parser("verify", help="check a schedule or report against an instance")
    verify.add_argument("--instance", required=True)
    verify.add_argument("--schedule", required=True)
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "zeta", "absent") is None:
        args.zeta = _default_zeta()
    if getattr(args, "jobs", 1) < 1:
        print("flowsched: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
