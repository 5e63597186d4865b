import pytest

from c11sem.front import BOTTOM, Front
from c11sem.lang import Lit, Loc, Sym
from c11sem.state import (
    AspectConfig, BindRec, History, IfRec, MachineState, ReadRec, WriteRec, append_buffer, check_invariants,
    conflicts, dump_state, initial_state, interleavings, join_meta, spawn_meta,
)

X, Y = Lit(Loc("x")), Lit(Loc("y"))


def test_history_timestamps_are_contiguous():
    h = History().append("x", 0, BOTTOM).append("x", 1, Front({"x": 1}))
    assert h.last_tau("x") == 1 and h.next_tau("x") == 2
    assert h.get("x", 1).front == Front({"x": 1})
    assert h.get("x", 2) is None and h.last_tau("y") is None


def test_history_is_persistent():
    h0 = History()
    h1 = h0.append("x", 0, BOTTOM)
    assert h0.entries("x") == () and len(h1.entries("x")) == 1


def test_aspect_flags_round_trip():
    a = AspectConfig.from_flags("sc,na,po,arr,wf", "interleave")
    assert AspectConfig.from_flags(a.to_flags()) == a
    assert not a.consume_reads and a.postponed_ops


@pytest.mark.parametrize("flags, join", [("arr", "strict"), ("sc", "interleave"), ("bogus", "strict")])
def test_invalid_aspect_combinations(flags, join):
    with pytest.raises(ValueError):
        AspectConfig.from_flags(flags, join)


def test_spawn_inherits_parent_front():
    st = initial_state().with_(rd={"": Front({"x": 0})})
    st2 = spawn_meta("", st)
    assert st2.rd["L"] == st2.rd["R"] == Front({"x": 0})
    assert st2.bufs["L"] == st2.bufs["R"] == ()


def test_join_merges_fronts():
    st = spawn_meta("", initial_state())
    st = st.with_(rd={**st.rd, "L": Front({"x": 2}), "R": Front({"x": 1, "y": 3})})
    (out,) = join_meta("", st, "strict")
    assert out.rd == {"": Front({"x": 2, "y": 3})}


def test_strict_join_requires_empty_buffers():
    st = spawn_meta("", initial_state(AspectConfig(postponed_ops=True)))
    st = st.with_(bufs={**st.bufs, "L": (ReadRec(0, X, "rlx"),)})
    assert join_meta("", st, "strict") == []
    assert len(join_meta("", st, "interleave")) == 1


def test_interleavings_count_is_binomial():
    assert len(list(interleavings((1, 2), ("a", "b", "c")))) == 10


def test_nested_buffer_append():
    buf = (IfRec(0, Sym(9)),)
    buf = append_buffer(buf, ((0, 0),), WriteRec(1, X, "rlx", Lit(1)))
    buf = append_buffer(buf, ((0, 1),), ReadRec(2, Y, "rlx"))
    assert buf[0].then == (WriteRec(1, X, "rlx", Lit(1)),)
    assert buf[0].else_ == (ReadRec(2, Y, "rlx"),)


def test_conflicts_same_location_and_dependencies():
    w = WriteRec(0, X, "rlx", Lit(1))
    assert conflicts(ReadRec(1, X, "rlx"), w)
    assert not conflicts(ReadRec(1, Y, "rlx"), w)
    assert conflicts(w, BindRec(2, Sym(0)))  # later entry depends on #0
    assert not conflicts(w, BindRec(2, Sym(5)))
    # nothing overtakes an earlier acquiring read
    assert conflicts(ReadRec(1, Y, "acq"), WriteRec(0, X, "rlx", Lit(1)))
    assert not conflicts(ReadRec(1, Y, "rlx"), WriteRec(0, X, "rlx", Lit(1)))


def test_dump_state_sections():
    text = dump_state(initial_state())
    for header in ("history:", "read fronts:", "sc front:", "na front:", "write fronts:", "buffers:", "gamma:", "retired:"):
        assert header in text


def test_check_invariants_detects_front_beyond_history():
    st = initial_state().with_(rd={"": Front({"x": 0})})
    assert check_invariants(st)
    st = st.with_(history=History().append("x", 0, BOTTOM))
    assert check_invariants(st) == []


def test_state_key_ignores_counter():
    a = MachineState(counter=0)
    assert a.key() == a.with_(counter=7).key()
