import pytest

from c11sem.litmus import (
    CORPUS, LitmusFormatError, LitmusTest, check_test, dump_test, format_outcome, get_test, leaves,
    load_suite, load_test_file, parse_outcome,
)
from c11sem.parser import SourceProgram
from c11sem.state import AspectConfig

FAMILIES = {"SB": 4, "LB": 9, "MP": 10, "CoRR": 2, "IRIW": 3, "WRC": 4, "OTA": 2, "WR": 3, "SE": 3}


def test_corpus_size_and_families():
    assert len(load_suite()) == len(CORPUS) == 42
    for family, n in FAMILIES.items():
        assert len([t for t in CORPUS if t.name.startswith(family + "_")]) == n, family
    assert {t.name for t in CORPUS if t.name in ("Dekker", "Cohen")} == {"Dekker", "Cohen"}


def test_names_are_unique():
    names = [t.name for t in CORPUS]
    assert len(names) == len(set(names))


def test_load_suite_filters():
    assert [t.name for t in load_suite("OTA")] == ["OTA_lb", "OTA_if"]
    assert load_suite("nonexistent") == []
    assert load_suite("^SB_sc$")[0].name == "SB_sc"


def test_get_unknown_test():
    with pytest.raises(KeyError):
        get_test("nope")


def test_every_test_has_expectations_and_parses():
    for t in CORPUS:
        assert t.expected or t.expect_stuck
        t.parsed()


def test_arr_tests_also_enable_postponement():
    for t in CORPUS:
        if t.aspects.arr_gamma:
            assert t.aspects.postponed_ops


def test_empty_expectation_rejected():
    with pytest.raises(ValueError):
        LitmusTest("x", SourceProgram("ret 0"), AspectConfig(), frozenset())


def test_leaves_and_format():
    assert leaves((1, ((2, 3), 4))) == (1, 2, 3, 4)
    assert format_outcome((5,)) == "5"
    assert format_outcome((0, 1)) == "(0, 1)"
    assert parse_outcome("(0, (1, 2))") == (0, 1, 2)


@pytest.mark.parametrize("t", CORPUS, ids=lambda t: t.name)
def test_file_format_round_trip(t):
    back = load_test_file(dump_test(t), t.name)
    assert (back.name, back.aspects, back.expected, back.expect_stuck, back.observe) == \
        (t.name, t.aspects, t.expected, t.expect_stuck, t.observe)
    assert back.parsed() == t.parsed()


@pytest.mark.parametrize("text", [
    "name: a\naspects: po\nexpect: 0\nret 0",          # no blank line
    "aspects: po\nexpect: 0\n\nret 0",                  # no name
    "name: a\ncolour: red\nexpect: 0\n\nret 0",         # unknown key
])
def test_bad_test_files(text):
    with pytest.raises(LitmusFormatError):
        load_test_file(text)


def test_verdict_reports_differences():
    t = get_test("SB_sc")
    wrong = LitmusTest("SB_sc_wrong", t.program, t.aspects, t.expected | {(0, 0)})
    v = check_test(wrong)
    assert v.status == "fail" and v.missing == {(0, 0)} and not v.unexpected
    assert "missing (0, 0)" in v.describe()


def test_truncation_is_not_a_pass():
    v = check_test(get_test("CoRR_rlx"), max_states=100)
    assert v.status == "truncated" and not v.passed


def test_join_policy_sensitivity():
    t = get_test("LB_rlx+join")
    strict = check_test(t, aspects=AspectConfig.from_flags("po"))
    assert (1, 1) in t.expected and (1, 1) not in strict.outcomes


def test_c11_discrepancy_is_flagged():
    assert get_test("LB_acq+rlx").c11_discrepancy
    assert get_test("WR_rlx").notes
