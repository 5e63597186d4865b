"""Command-line front end: ``c11sem <command> ...``.

Exit codes: 0 when everything behaves as expected, 1 on a test failure or
property violation, 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from .explorer import DEFAULT_MAX_DEPTH, DEFAULT_MAX_STATES, explore, is_stuck, witness_trace
from .lang import Stmt
from .litmus import (
    LitmusFormatError, LitmusTest, check_test, dump_test, format_outcome, leaves, load_suite,
    load_test_file, parse_outcome, sorted_outcomes,
)
from .parser import ParseError, SourceProgram, parse
from .random_runner import DEFAULT_FUEL, TransitionCache, random_run
from .semantics import outcome_of
from .rcu import VARIANTS, campaign, rcu_source
from .state import AspectConfig

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
_HEADER_RE = re.compile(r"^\s*name\s*:", re.MULTILINE)


class UsageError(Exception):
    pass


def _aspects(args, fallback: AspectConfig | None) -> AspectConfig:
    try:
        if args.aspects is None:
            base = fallback or AspectConfig()
            if args.join is None:
                return base
            flags = base.to_flags().split(",") if base.to_flags() else []
            flags = [f for f in flags if not f.startswith("join=")]
            return AspectConfig.from_flags(flags, args.join)
        return AspectConfig.from_flags(args.aspects, args.join or "strict")
    except ValueError as e:
        raise UsageError(str(e)) from None


def _load(path: str) -> tuple[Stmt, LitmusTest | None]:
    """A plain program file, or a test file with a header block."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    first = next((ln for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("//")), "")
    if _HEADER_RE.match(first):
        test = load_test_file(text, path)
        return test.parsed(), test
    return parse(SourceProgram(text, path)), None


def _outcome_text(v, test: LitmusTest | None) -> str:
    return format_outcome(test.project(v) if test else leaves(v))


def cmd_explore(args) -> int:
    prog, test = _load(args.file)
    aspects = _aspects(args, test.aspects if test else None)
    res = explore(prog, aspects, max_states=args.max_states, max_depth=args.max_depth)
    projected = {(test.project(v) if test else leaves(v)) for v in res.outcomes}
    print(f"aspects: {aspects.to_flags() or '(none)'}")
    print("outcomes:")
    for o in sorted_outcomes(projected):
        print(f"  {format_outcome(o)}")
    if res.stuck_reachable:
        print("stuck: reachable via " + ", ".join(sorted(res.stuck_rules)))
    else:
        print("stuck: unreachable")
    if res.deadlocks:
        print(f"blocked configurations: {len(res.deadlocks)}")
    print(f"states: {res.state_count}")
    if res.truncated:
        print("warning: exploration truncated by the state or depth budget")
        return EXIT_FAIL
    if test is not None:
        ok = projected == set(test.expected) and res.stuck_reachable == test.expect_stuck
        print(f"expected behaviour of {test.name}: {'matched' if ok else 'NOT matched'}")
        return EXIT_OK if ok else EXIT_FAIL
    return EXIT_OK


def cmd_random(args) -> int:
    prog, test = _load(args.file)
    aspects = _aspects(args, test.aspects if test else None)
    cache = TransitionCache()
    tally: dict[str, int] = {}
    violations = 0
    for i in range(args.runs):
        rep = random_run(prog, aspects, args.seed + i, args.fuel, cache=cache, record=args.trace)
        result = rep.result if rep.kind != "value" else _outcome_text(rep.value, test)
        line = f"seed={rep.seed} steps={rep.steps} result={result}"
        if test is not None:
            if rep.kind == "value" and test.project(rep.value) not in test.expected:
                line += "  UNEXPECTED"
                violations += 1
            elif rep.kind == "stuck" and not test.expect_stuck:
                line += "  UNEXPECTED"
                violations += 1
        print(line)
        if args.trace and rep.trace is not None:
            print(rep.trace.format())
        key = "stuck" if rep.kind == "stuck" else ("terminated" if rep.kind == "value" else rep.kind)
        tally[key] = tally.get(key, 0) + 1
    print("summary: " + ", ".join(f"{k} {n}" for k, n in sorted(tally.items())))
    return EXIT_FAIL if violations else EXIT_OK


def cmd_litmus(args) -> int:
    tests = load_suite(args.filter)
    if args.dump is not None:
        out = Path(args.dump)
        out.mkdir(parents=True, exist_ok=True)
        for t in tests:
            (out / f"{t.name}.lit").write_text(dump_test(t), encoding="utf-8")
        print(f"wrote {len(tests)} test files to {out}")
        return EXIT_OK
    if not tests:
        print(f"no litmus test matches {args.filter!r}")
        return EXIT_OK
    failures = 0
    for t in tests:
        aspects = _aspects(args, t.aspects) if (args.aspects is not None or args.join is not None) else None
        v = check_test(t, max_states=args.max_states, aspects=aspects)
        print(v.describe())
        failures += not v.passed
    print(f"{len(tests) - failures}/{len(tests)} passed")
    return EXIT_FAIL if failures else EXIT_OK


def cmd_trace(args) -> int:
    prog, test = _load(args.file)
    aspects = _aspects(args, test.aspects if test else None)
    if args.to.strip() == "stuck":
        pred = is_stuck
    else:
        try:
            want = parse_outcome(args.to)
        except (ParseError, ValueError) as e:
            raise UsageError(f"cannot read outcome {args.to!r}: {e}") from None

        def pred(c):
            if is_stuck(c):
                return False
            v = outcome_of(c)
            return (test.project(v) if test else leaves(v)) == want
    tr = witness_trace(prog, aspects, pred, max_states=args.max_states, max_depth=args.max_depth)
    if tr is None:
        print(f"no execution reaches {args.to}")
        return EXIT_FAIL
    print(tr.format(with_states=args.states))
    return EXIT_OK


def cmd_rcu(args) -> int:
    if args.emit:
        sys.stdout.write(rcu_source(args.variant))
        return EXIT_OK
    kw = {}
    if args.aspects is not None or args.join is not None:
        kw["aspects"] = _aspects(args, None)
    summary = campaign(args.variant, args.runs, args.seed, args.fuel, **kw)
    print(summary.table())
    bad = summary.invariant_failures or (args.variant == "correct" and summary.stuck_count)
    return EXIT_FAIL if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--aspects", default=None,
                        help="comma-separated aspects: sc,na,po,arr,cr,wf (also no-dealloc, no-promote)")
    common.add_argument("--join", choices=("strict", "interleave"), default=None, help="join policy")

    budget = argparse.ArgumentParser(add_help=False)
    budget.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    budget.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH)

    p = argparse.ArgumentParser(prog="c11sem", description="Executable operational semantics for C11 concurrency.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("explore", parents=[common, budget], help="enumerate all outcomes of a program")
    e.add_argument("file")
    e.set_defaults(func=cmd_explore)

    r = sub.add_parser("random", parents=[common], help="seeded random runs")
    r.add_argument("file")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--runs", type=int, default=1)
    r.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    r.add_argument("--trace", action="store_true", help="print the trace of every run")
    r.set_defaults(func=cmd_random)

    lt = sub.add_parser("litmus", parents=[common, budget], help="run the litmus corpus")
    lt.add_argument("--filter", default=None, help="regular expression on test names")
    lt.add_argument("--dump", metavar="DIR", default=None, help="write the corpus as test files instead")
    lt.set_defaults(func=cmd_litmus)

    t = sub.add_parser("trace", parents=[common, budget], help="print a shortest witness trace")
    t.add_argument("file")
    t.add_argument("--to", required=True, help="an outcome such as '(0, 1)', or 'stuck'")
    t.add_argument("--states", action="store_true", help="print the configuration after each step")
    t.set_defaults(func=cmd_trace)

    c = sub.add_parser("rcu", parents=[common], help="randomized RCU campaign")
    c.add_argument("--variant", choices=VARIANTS, default="correct")
    c.add_argument("--runs", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    c.add_argument("--emit", action="store_true", help="print the program source and exit")
    c.set_defaults(func=cmd_rcu)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ParseError, LitmusFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
