import pytest
from hypothesis import given, settings

from c11sem.lang import NULL, SEQ_VAR, BinOp, Bind, Cas, Delete, If, Lit, Loc, PairE, Par, Read, Repeat, Ret, Spw, Var, Write
from c11sem.litmus import load_suite
from c11sem.parser import ParseError, parse, parse_expr, tokenize
from c11sem.printer import print_stmt, pretty
from c11sem.rcu import VARIANTS, build_rcu

from programs import stmts


def test_write_syntax():
    assert parse("[f]_rel := 1") == Write("rel", Lit(Loc("f")), Lit(1))


def test_read_binding_and_scope():
    s = parse("r1 = [x]_acq; ret r1")
    assert s == Bind("r1", Read("acq", Lit(Loc("x"))), Ret(Var("r1")))


def test_sequence_uses_anonymous_binder():
    s = parse("[x]_rlx := 0; [y]_rlx := 0")
    assert isinstance(s, Bind) and s.var == SEQ_VAR


def test_tuple_is_right_nested():
    assert parse_expr("(1, 2, 3)") == PairE(Lit(1), PairE(Lit(2), Lit(3)))


def test_spawn_and_parallel_sugar():
    a = parse("spw { ret 1 } { ret 2 }")
    b = parse("ret 1 ||| ret 2")
    assert a == b == Spw(Ret(Lit(1)), Ret(Lit(2)))


def test_local_variable_dereference():
    s = parse("r = [p]_rlx; v = [r]_na; ret v")
    assert s.rest.first == Read("na", Var("r"))


def test_cas_and_delete():
    s = parse("cas_{relAcq, acq}(x, 0, 1); delete x")
    assert s.first == Cas("relAcq", "acq", Lit(Loc("x")), Lit(0), Lit(1))
    assert s.rest == Delete(Lit(Loc("x")))


def test_if_repeat_and_null():
    s = parse("repeat r = [x]_acq; if r != null then ret 1 else ret 0 fi end")
    assert isinstance(s, Repeat)
    assert s.body.rest.cond == BinOp("!=", Var("r"), Lit(NULL))


def test_value_binding_sugar():
    assert parse("q = 1 + 2; ret q") == Bind("q", Ret(BinOp("+", Lit(1), Lit(2))), Ret(Var("q")))


def test_comments_are_ignored():
    assert parse("// hello\nret 0 // trailing") == Ret(Lit(0))


@pytest.mark.parametrize("src, where", [
    ("[x]_acq := 1", "not allowed for a write"),
    ("[x]_rel", "not allowed for a read"),
    ("cas_{rel, rel}(x, 0, 1)", "failed CAS"),
    ("stuck", "runtime-only"),
    ("par { ret 1 } { ret 2 }", "runtime-only"),
    ("ret", "expected an expression"),
    ("ret 1 $", "unexpected character"),
])
def test_parse_errors_name_the_problem(src, where):
    with pytest.raises(ParseError) as exc:
        parse(src)
    assert where in str(exc.value)


def test_parse_error_positions():
    with pytest.raises(ParseError) as exc:
        parse("ret 1;\n[x]_acq := 2")
    assert exc.value.line == 2


def test_tokenizer_tracks_columns():
    toks = tokenize("ret  x")
    assert (toks[1].line, toks[1].col) == (1, 6)


def test_print_examples():
    assert print_stmt(Write("rel", Lit(Loc("f")), Lit(1))) == "[f]_rel := 1"
    assert print_stmt(Par(Ret(Lit(1)), Ret(Lit(2)))) == "par { ret 1 } { ret 2 }"


@pytest.mark.parametrize("test", load_suite(), ids=lambda t: t.name)
def test_corpus_round_trip(test):
    s = test.parsed()
    assert parse(print_stmt(s)) == s
    assert parse(pretty(s)) == s


@pytest.mark.parametrize("variant", VARIANTS)
def test_rcu_round_trip(variant):
    s = build_rcu(variant)
    assert parse(print_stmt(s)) == s


@settings(max_examples=1000, deadline=None)
@given(stmts())
def test_random_program_round_trip(s):
    assert parse(print_stmt(s)) == s
    assert parse(pretty(s)) == s
