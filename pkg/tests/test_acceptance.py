"""The six acceptance criteria, one test each.  Every test prints a
single PASS/FAIL line; the lines are repeated in the pytest summary.
Run directly with ``python3 tests/test_acceptance.py`` for just the lines.
"""

import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from acceptance_log import record  # noqa: E402

from c11sem import AspectConfig, explore, parse  # noqa: E402
from c11sem.explorer import canonical_config, follow  # noqa: E402
from c11sem.litmus import CORPUS, check_test, get_test  # noqa: E402
from c11sem.random_runner import TransitionCache, random_run, replay  # noqa: E402
from c11sem.rcu import BUG_RULES, VARIANTS, campaign  # noqa: E402
from c11sem.semantics import initial_config, outcome_of  # noqa: E402

PER_TEST_LIMIT = 120.0


# ---------------------------------------------------------------------------
# 1. Litmus regression
# ---------------------------------------------------------------------------

ALL4 = {(0, 0), (0, 1), (1, 0), (1, 1)}


def _specific_checks(verdicts):
    out = lambda name: verdicts[name].outcomes  # noqa: E731
    stuck = lambda name: verdicts[name].stuck_reachable  # noqa: E731
    checks = {
        "SB_sc forbids (0,0)": (0, 0) not in out("SB_sc"),
        "LB_rlx admits (1,1)": (1, 1) in out("LB_rlx"),
        "LB_acq+rlx forbids (1,1)": (1, 1) not in out("LB_acq+rlx"),
        "OTA_lb is {(0,0)}": out("OTA_lb") == {(0, 0)},
        "OTA_if is {(0,0)}": out("OTA_if") == {(0, 0)},
        "IRIW_sc forbids (1,0,1,0)": (1, 0, 1, 0) not in out("IRIW_sc"),
        "CoRR forbids cross tuples": all(
            not {(1, 2, 2, 1), (2, 1, 1, 2)} & out(n) for n in ("CoRR_rlx", "CoRR_rel+acq")),
        "MP_rel+acq+na is {5}, no stuck": out("MP_rel+acq+na") == {(5,)} and not stuck("MP_rel+acq+na"),
        "MP_cas+rel+acq+na stuck unreachable": not stuck("MP_cas+rel+acq+na"),
        "MP_cas+rel+rlx+na stuck reachable": stuck("MP_cas+rel+rlx+na"),
        "SE_* admit res=1": all((1,) in out(n) for n in ("SE_simple", "SE_prop", "SE_nested")),
    }
    return checks


def criterion_1():
    verdicts, slow, failed = {}, [], []
    for t in CORPUS:
        v = check_test(t)
        verdicts[t.name] = v
        if not v.passed:
            failed.append(v.describe())
        if v.seconds > PER_TEST_LIMIT:
            slow.append(f"{t.name} {v.seconds:.1f}s")
    checks = _specific_checks(verdicts)
    bad_checks = [k for k, ok in checks.items() if not ok]
    ok = not failed and not slow and not bad_checks
    worst = max(verdicts.values(), key=lambda v: v.seconds)
    detail = (f"{len(CORPUS) - len(failed)}/{len(CORPUS)} tests pass, {len(checks) - len(bad_checks)}/{len(checks)} "
              f"named checks hold, slowest {worst.test.name} {worst.seconds:.1f}s")
    return ok, detail, failed + slow + bad_checks


def test_criterion_1_litmus_regression():
    ok, detail, problems = criterion_1()
    record(1, ok, "litmus corpus exact outcome sets", detail)
    assert ok, problems


# ---------------------------------------------------------------------------
# 2. Walkthrough of the message-passing example
# ---------------------------------------------------------------------------

MP_PROGRAM = ("[f]_na := 0; [d]_na := 0; "
              "spw { [d]_na := 5; [f]_rel := 1 } { repeat [f]_acq end; r = [d]_na; ret r }")

# Each table: history rows (loc, timestamp, value, stored front) and the
# read fronts of the running threads.  Non-atomic writes store the empty front.
GOLDEN_TABLES = {
    "O": ("history:\n"
          "read fronts:\n  - {}"),
    "II": ("history:\n  d 0 = 0 {}\n  f 0 = 0 {}\n"
           "read fronts:\n  - {d:0, f:0}"),
    "III": ("history:\n  d 0 = 0 {}\n  f 0 = 0 {}\n"
            "read fronts:\n  L {d:0, f:0}\n  R {d:0, f:0}"),
    "IV": ("history:\n  d 0 = 0 {}\n  d 1 = 5 {}\n  f 0 = 0 {}\n"
           "read fronts:\n  L {d:1, f:0}\n  R {d:0, f:0}"),
    "V": ("history:\n  d 0 = 0 {}\n  d 1 = 5 {}\n  f 0 = 0 {}\n  f 1 = 1 {d:1, f:1}\n"
          "read fronts:\n  L {d:1, f:1}\n  R {d:0, f:0}"),
    "VII": ("history:\n  d 0 = 0 {}\n  d 1 = 5 {}\n  f 0 = 0 {}\n  f 1 = 1 {d:1, f:1}\n"
            "read fronts:\n  L {d:1, f:1}\n  R {d:1, f:1}"),
    "VIII": ("history:\n  d 0 = 0 {}\n  d 1 = 5 {}\n  f 0 = 0 {}\n  f 1 = 1 {d:1, f:1}\n"
             "read fronts:\n  - {d:1, f:1}"),
}

SCRIPT = [
    ("II", [("WriteNA", "", None), ("Subst", "", None), ("WriteNA", "", None), ("Subst", "", None)]),
    ("III", [("Spawn", "", None)]),
    ("IV", [("WriteNA", "L", None)]),
    ("V", [("Subst", "L", None), ("WriteRel", "L", None)]),
    ("VII", [("Repeat-Unroll", "R", None), ("ReadAcq", "R", "f@1")]),
    ("VIII", [("Subst", "R", None), ("If-True", "R", None), ("Subst", "R", None), ("ReadNA", "R", "d@1"),
              ("Subst", "R", None), ("Join", "", None)]),
]


def table_view(c) -> str:
    """History and the read fronts of the running (leaf) threads."""
    st = c.state
    lines = ["history:"]
    for loc in st.history.locations():
        for tau, e in enumerate(st.history.entries(loc)):
            lines.append(f"  {loc} {tau} = {e.value} {e.front}")
    lines.append("read fronts:")
    for p in sorted(st.rd):
        if p + "L" not in st.rd:
            lines.append(f"  {p or '-'} {st.rd[p]}")
    return "\n".join(lines)


def criterion_2():
    c = canonical_config(initial_config(parse(MP_PROGRAM), AspectConfig.from_flags("na")))
    views = {"O": table_view(c)}
    for name, steps in SCRIPT:
        for rule, path, note in steps:
            c = follow(c, rule, path, note)
        views[name] = table_view(c)
    mismatched = [n for n in GOLDEN_TABLES if views.get(n) != GOLDEN_TABLES[n]]
    final_ok = outcome_of(c) == (1, 5)
    return not mismatched and final_ok, mismatched, views


def test_criterion_2_walkthrough():
    ok, mismatched, views = criterion_2()
    record(2, ok, "message-passing walkthrough reproduces seven state tables",
           f"{len(GOLDEN_TABLES) - len(mismatched)}/{len(GOLDEN_TABLES)} tables match")
    assert ok, {n: views.get(n) for n in mismatched}


# ---------------------------------------------------------------------------
# 3. Aspect ablations
# ---------------------------------------------------------------------------


def _outs(name, aspects):
    t = get_test(name)
    res = explore(t.parsed(), aspects)
    assert not res.truncated
    return {t.project(v) for v in res.outcomes}


def criterion_3():
    lb = get_test("LB_rlx")
    se = get_test("SE_simple")
    lbj = get_test("LB_rlx+join")
    sb = get_test("SB_sc")
    results = {}
    results["LB_rlx without postponement"] = (
        _outs("LB_rlx", lb.aspects) == ALL4
        and _outs("LB_rlx", AspectConfig.from_flags("")) == ALL4 - {(1, 1)})
    results["SE_simple without Write-Promote"] = (
        _outs("SE_simple", se.aspects) == {(0,), (1,)}
        and _outs("SE_simple", AspectConfig.from_flags("po,no-promote")) == {(0,)})
    strict = _outs("LB_rlx+join", AspectConfig.from_flags("po"))
    inter = _outs("LB_rlx+join", AspectConfig.from_flags("po", "interleave"))
    results["LB_rlx+join strict vs interleave"] = inter == ALL4 and strict == ALL4 - {(1, 1)}
    results["SB_sc without SC fronts"] = (
        _outs("SB_sc", sb.aspects) == ALL4 - {(0, 0)}
        and _outs("SB_sc", AspectConfig.from_flags("")) == _outs("SB_rel+acq", get_test("SB_rel+acq").aspects) == ALL4)
    return all(results.values()), results


def test_criterion_3_ablations():
    ok, results = criterion_3()
    record(3, ok, "aspect ablations", ", ".join(f"{k}: {'ok' if v else 'WRONG'}" for k, v in results.items()))
    assert ok, results


# ---------------------------------------------------------------------------
# 4. Property suites
# ---------------------------------------------------------------------------


def criterion_4():
    import test_front
    import test_parser
    import test_properties

    suites = {
        "front lattice laws": [test_front.test_join_commutative, test_front.test_join_associative,
                               test_front.test_join_idempotent_and_bottom_identity,
                               test_front.test_join_is_least_upper_bound, test_front.test_leq_agrees_with_join],
        "history contiguity and front bounds": [test_properties.test_history_contiguity_and_front_bounds],
        "no out-of-thin-air reads": [test_properties.test_no_out_of_thin_air_reads_over_corpus],
        "gamma hygiene": [test_properties.test_gamma_hygiene_over_corpus,
                          test_properties.test_gamma_hygiene_random_programs],
        "canonicalize renaming invariance": [test_properties.test_canonicalize_is_invariant_under_renaming],
        "parse/print round trip": [test_parser.test_random_program_round_trip],
    }
    test_properties.STEP_COUNT["steps"] = 0
    failures = {}
    for name, fns in suites.items():
        for fn in fns:
            try:
                fn()
            except Exception as e:  # noqa: BLE001
                failures[name] = f"{fn.__name__}: {type(e).__name__}: {e}"[:300]
    steps = test_properties.STEP_COUNT["steps"]
    if steps < 10_000:
        failures["history contiguity and front bounds"] = f"only {steps} random steps checked"
    return not failures, failures, len(suites), steps


def test_criterion_4_property_suites():
    ok, failures, n, steps = criterion_4()
    record(4, ok, "property suites with 1000 cases each",
           f"{n - len(failures)}/{n} suites hold, {steps} random steps checked")
    assert ok, failures


# ---------------------------------------------------------------------------
# 5. Random runner soundness and replay
# ---------------------------------------------------------------------------

RUNS_PER_TEST = 10_000
REPLAYS = 100


def criterion_5():
    unsound, reports = [], []
    for t in CORPUS:
        prog = t.parsed()
        res = explore(prog, t.aspects)
        allowed = res.outcomes
        cache = TransitionCache()
        for seed in range(RUNS_PER_TEST):
            rep = random_run(prog, t.aspects, seed, cache=cache, record=False)
            if rep.kind == "value" and rep.value not in allowed:
                unsound.append(f"{t.name} seed {seed}: {rep.result}")
            elif rep.kind == "stuck" and not res.stuck_reachable:
                unsound.append(f"{t.name} seed {seed}: unexpected {rep.result}")
            elif rep.kind not in ("value", "stuck"):
                unsound.append(f"{t.name} seed {seed}: {rep.kind}")
    rng = random.Random(2024)
    mismatches = []
    for _ in range(REPLAYS):
        t = rng.choice(CORPUS)
        seed = rng.randrange(2**63)
        prog = t.parsed()
        rep = random_run(prog, t.aspects, seed)
        try:
            again = replay(rep, prog, t.aspects)
            if again.serialize(with_states=False).encode() != rep.serialize().encode():
                mismatches.append(f"{t.name} seed {seed}")
        except AssertionError:
            mismatches.append(f"{t.name} seed {seed}")
    return not unsound and not mismatches, unsound[:20], mismatches


def test_criterion_5_random_runner():
    start = time.perf_counter()
    ok, unsound, mismatches = criterion_5()
    record(5, ok, "random runs stay inside the exhaustive outcome sets; replays are bit-exact",
           f"{len(CORPUS)} tests x {RUNS_PER_TEST} runs, {len(unsound)} unsound, "
           f"{REPLAYS - len(mismatches)}/{REPLAYS} replays identical, {time.perf_counter() - start:.0f}s")
    assert ok, (unsound, mismatches)


# ---------------------------------------------------------------------------
# 6. RCU campaign
# ---------------------------------------------------------------------------

RCU_SEED_BASE = 100
RCU_LIMIT = 120.0


def criterion_6():
    lines, ok = [], True
    correct = campaign("correct", 20, RCU_SEED_BASE)
    slow = max(correct.runtimes)
    good = correct.stuck_count == 0 and correct.invariant_failures == 0 and correct.incomplete == 0 and slow <= RCU_LIMIT
    ok &= good
    waiting = sum(r.report.kind == "diverged" for r in correct.rows)
    lines.append(f"correct: {correct.stuck_count}/20 stuck, {correct.invariant_failures} invariant failures, "
                 f"{waiting} runs end with the writer waiting forever, max {slow:.1f}s")
    for v in VARIANTS[1:]:
        s = campaign(v, 10, RCU_SEED_BASE)
        good = s.stuck_count >= 1 and s.stuck_rules <= BUG_RULES and max(s.runtimes) <= RCU_LIMIT
        ok &= good
        lines.append(f"{v}: {s.stuck_count}/10 stuck via {','.join(sorted(s.stuck_rules)) or '-'}")
    return ok, lines


def test_criterion_6_rcu_campaign():
    ok, lines = criterion_6()
    record(6, ok, "RCU campaign", "; ".join(lines))
    assert ok, lines


if __name__ == "__main__":
    tests = [test_criterion_1_litmus_regression, test_criterion_2_walkthrough, test_criterion_3_ablations,
             test_criterion_4_property_suites, test_criterion_5_random_runner, test_criterion_6_rcu_campaign]
    failed = 0
    for fn in tests:
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
