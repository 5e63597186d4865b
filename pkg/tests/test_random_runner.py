import pytest

from c11sem import AspectConfig, explore, parse
from c11sem.litmus import get_test
from c11sem.random_runner import (
    ReplayMismatch, RunReport, TransitionCache, ordered_successors, random_run, replay,
)
from c11sem.semantics import initial_config

SEQ = "[x]_rlx := 1; r = [x]_rlx; ret r + 1"


def test_deterministic_program_gives_explore_outcome_for_any_seed():
    prog = parse(SEQ)
    (expected,) = explore(prog, AspectConfig()).outcomes
    for seed in range(20):
        rep = random_run(prog, AspectConfig(), seed)
        assert rep.kind == "value" and rep.value == expected == 2


def test_lb_rlx_outcomes_contained_in_exhaustive_set():
    t = get_test("LB_rlx")
    prog = t.parsed()
    allowed = explore(prog, t.aspects).outcomes
    cache = TransitionCache()
    seen = set()
    for seed in range(10_000):
        rep = random_run(prog, t.aspects, seed, cache=cache, record=False)
        assert rep.kind == "value" and rep.value in allowed
        seen.add(rep.value)
    assert len(seen) >= 3


def test_stuck_first():
    rep = random_run(parse("r = [x]_rlx; ret r"), AspectConfig(), 3)
    assert rep.kind == "stuck" and rep.stuck_rule == "Read-Uninit" and rep.steps == 1


def test_stuck_reported_whenever_a_successor_is_stuck():
    # both children race; every run must report stuck at the first racy step
    src = "[x]_na := 0; spw { [x]_na := 1 } { [x]_na := 2 }"
    for seed in range(30):
        rep = random_run(parse(src), AspectConfig(), seed)
        assert rep.kind == "stuck" and rep.stuck_rule == "WriteNA-stuck2"


def test_fuel_exhaustion_is_distinct():
    grow = parse("[x]_rlx := 0; repeat r = [x]_rlx; [x]_rlx := r + 1; ret 0 end")
    rep = random_run(grow, AspectConfig(), 0, fuel=200)
    assert rep.kind == "fuel-exhausted" and rep.steps == 200
    assert rep.header() == "seed=0 steps=200 result=fuel-exhausted"


def test_spinning_forever_is_reported_as_diverged():
    rep = random_run(parse("[x]_rlx := 0; repeat r = [x]_rlx; ret r end"), AspectConfig(), 0, fuel=10**5)
    assert rep.kind == "diverged" and rep.steps < 10**5


def test_without_detection_the_fuel_runs_out():
    rep = random_run(parse("[x]_rlx := 0; repeat r = [x]_rlx; ret r end"), AspectConfig(), 0, fuel=500,
                     detect_divergence=False)
    assert rep.kind == "fuel-exhausted"


def test_replay_is_bit_exact():
    t = get_test("IRIW_rlx")
    prog = t.parsed()
    for seed in (0, 1, 2**63 - 1):
        rep = random_run(prog, t.aspects, seed)
        again = replay(rep, prog, t.aspects)
        assert again.serialize() == rep.serialize()


def test_replay_with_cache_or_without_records_agrees():
    t = get_test("MP_rel+acq+na")
    prog = t.parsed()
    a = random_run(prog, t.aspects, 11)
    b = random_run(prog, t.aspects, 11, cache=TransitionCache())
    assert a.serialize() == b.serialize()
    c = random_run(prog, t.aspects, 11, record=False)
    assert c.header() == a.header()


def test_different_seeds_usually_differ():
    t = get_test("IRIW_rlx")
    prog = t.parsed()
    traces = {random_run(prog, t.aspects, s).serialize() for s in range(20)}
    assert len(traces) > 1


def test_replay_detects_mismatch():
    t = get_test("SB_rel+acq")
    prog = t.parsed()
    rep = random_run(prog, t.aspects, 5)
    forged = RunReport(rep.seed + 1, rep.steps, rep.kind, rep.value, rep.stuck_rule, rep.trace)
    other = random_run(prog, t.aspects, rep.seed + 1)
    if other.serialize() != forged.serialize():
        with pytest.raises(ReplayMismatch):
            replay(forged, prog, t.aspects)


def test_serialization_layout():
    rep = random_run(parse(SEQ), AspectConfig(), 1)
    lines = rep.serialize().splitlines()
    assert lines[0] == f"seed=1 steps={rep.steps} result=2"
    assert lines[1].startswith("step 1: ")
    assert len(lines) == rep.steps + 1


def test_successor_order_is_canonical_and_deduplicated():
    t = get_test("SB_rel+acq")
    c = initial_config(t.parsed(), t.aspects)
    succ = ordered_successors(c)
    keys = [r.config.key() for r in succ]
    assert len(keys) == len(set(keys))
    assert [(r.path, r.rule, r.note) for r in succ] == sorted((r.path, r.rule, r.note) for r in succ)
