"""The litmus corpus, its expected outcome sets and the pass/fail harness.

Every program returns its observed registers: each thread ends with
``ret r`` (or a tuple of registers) and the outcome of the whole program is
the tree of thread results.  An outcome is compared as the flat tuple of its
leaves, optionally restricted to the positions listed in ``observe``.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from itertools import product

from .explorer import DEFAULT_MAX_DEPTH, DEFAULT_MAX_STATES, ExplorationResult, explore
from .lang import Value, format_value
from .parser import SourceProgram, parse
from .state import AspectConfig

# ---------------------------------------------------------------------------
# Tests and verdicts
# ---------------------------------------------------------------------------


def leaves(v: Value) -> tuple:
    """All leaves of a (nested) pair value, left to right."""
    if isinstance(v, tuple):
        return leaves(v[0]) + leaves(v[1])
    return (v,)


def format_outcome(t: tuple) -> str:
    if len(t) == 1:
        return format_value(t[0])
    return "(" + ", ".join(format_value(x) for x in t) + ")"


def _outcome_sort_key(t: tuple):
    return tuple((0, x, "") if type(x) is int else (1, 0, format_value(x)) for x in t)


def sorted_outcomes(outs) -> list[tuple]:
    return sorted(outs, key=_outcome_sort_key)


@dataclass(frozen=True)
class LitmusTest:
    name: str
    program: SourceProgram
    aspects: AspectConfig
    expected: frozenset
    expect_stuck: bool = False
    observe: tuple | None = None
    notes: str = ""
    c11_discrepancy: bool = False

    def __post_init__(self) -> None:
        if not self.expected and not self.expect_stuck:
            raise ValueError(f"{self.name}: no expected behaviour")

    def project(self, v: Value) -> tuple:
        flat = leaves(v)
        if self.observe is None:
            return flat
        return tuple(flat[i] for i in self.observe)

    def parsed(self):
        return parse(self.program)


@dataclass
class Verdict:
    test: LitmusTest
    status: str  # "pass", "fail" or "truncated"
    outcomes: frozenset
    stuck_reachable: bool
    missing: frozenset
    unexpected: frozenset
    states: int
    seconds: float
    result: ExplorationResult | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def describe(self) -> str:
        parts = [f"{self.status.upper():9} {self.test.name:24} states={self.states:<7} {self.seconds:6.2f}s"]
        if self.missing:
            parts.append("missing " + " ".join(format_outcome(t) for t in sorted_outcomes(self.missing)))
        if self.unexpected:
            parts.append("unexpected " + " ".join(format_outcome(t) for t in sorted_outcomes(self.unexpected)))
        if self.stuck_reachable != self.test.expect_stuck:
            parts.append("stuck " + ("reachable" if self.stuck_reachable else "unreachable")
                         + " (expected " + ("reachable" if self.test.expect_stuck else "unreachable") + ")")
        return "  ".join(parts)


def check_test(t: LitmusTest, max_states: int = DEFAULT_MAX_STATES, max_depth: int = DEFAULT_MAX_DEPTH,
               aspects: AspectConfig | None = None) -> Verdict:
    """Explore ``t`` and compare outcomes and stuck reachability."""
    start = time.perf_counter()
    res = explore(t.parsed(), aspects or t.aspects, max_states=max_states, max_depth=max_depth)
    secs = time.perf_counter() - start
    outs = frozenset(t.project(v) for v in res.outcomes)
    missing = t.expected - outs
    unexpected = outs - t.expected
    stuck = res.stuck_reachable
    if res.truncated:
        status = "truncated"
    elif missing or unexpected or stuck != t.expect_stuck:
        status = "fail"
    else:
        status = "pass"
    return Verdict(t, status, outs, stuck, frozenset(missing), frozenset(unexpected), res.state_count, secs, res)


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------


def _cross(*domains) -> frozenset:
    return frozenset(product(*domains))


def _test(name, aspects, expected, program, *, stuck=False, observe=None, notes="", c11=False) -> LitmusTest:
    return LitmusTest(name, SourceProgram(program.strip() + "\n", name), AspectConfig.from_flags(aspects),
                      frozenset(expected), stuck, observe, notes, c11)


_ALL2 = _cross((0, 1), (0, 1))


def _sb(name, aspects, init, t1, t2, expected):
    prog = f"""
{init}
spw {{
  {t1[0]};
  r1 = {t1[1]};
  ret r1
}} {{
  {t2[0]};
  r2 = {t2[1]};
  ret r2
}}"""
    return _test(name, aspects, expected, prog)


def _lb(name, aspects, r1, w1, r2, w2, expected, c11=False, notes=""):
    prog = f"""
[x]_rlx := 0; [y]_rlx := 0;
spw {{
  r1 = [y]_{r1};
  [x]_{w1} := 1;
  ret r1
}} {{
  r2 = [x]_{r2};
  [y]_{w2} := 1;
  ret r2
}}"""
    return _test(name, aspects, expected, prog, c11=c11, notes=notes)


def _lb_join(name, r, w, expected, c11=False, notes=""):
    prog = f"""
[x]_rlx := 0; [y]_rlx := 0;
spw {{
  a = spw {{ r1 = [y]_{r}; [z1]_rlx := r1 }} {{ ret 0 }};
  [x]_{w} := 1;
  ret fst a
}} {{
  b = spw {{ r2 = [x]_{r}; [z2]_rlx := r2 }} {{ ret 0 }};
  [y]_{w} := 1;
  ret fst b
}}"""
    return _test(name, "po,join=interleave", expected, prog, c11=c11, notes=notes)


_RACY_MP = ("Without synchronisation every path reaching the read of d races with the "
            "non-atomic write, so only stuck is observed; the listing also names the values "
            "0 and 5, which the reduction rules cannot reach.")


def _mp(name, aspects, init_f, wf, rf, expected, stuck, notes=""):
    prog = f"""
[f]_{init_f} := 0; [d]_na := 0;
spw {{
  [d]_na := 5;
  [f]_{wf} := 1;
  ret 0
}} {{
  repeat [f]_{rf} end;
  r1 = [d]_na;
  ret r1
}}"""
    return _test(name, aspects, expected, prog, stuck=stuck, observe=(1,), notes=notes)


def _mp_cas(name, aspects, mod, stuck, expected):
    prog = f"""
[f]_rlx := 1; [d]_na := 0;
spw {{
  [d]_na := 5;
  [f]_rel := 0;
  ret 0
}} {{
  spw {{
    r1 = cas_{{{mod},rlx}}(f, 0, 1);
    if r1 == 0 then [d]_rlx := 6 else ret 0 fi;
    ret r1
  }} {{
    r2 = cas_{{{mod},rlx}}(f, 0, 1);
    if r2 == 0 then [d]_rlx := 7 else ret 0 fi;
    ret r2
  }}
}}"""
    return _test(name, aspects, expected, prog, stuck=stuck, observe=(1, 2))


def _corr(name, aspects, w, r):
    prog = f"""
[x]_{w} := 0;
spw {{
  spw {{ [x]_{w} := 1; ret 0 }} {{ [x]_{w} := 2; ret 0 }}
}} {{
  spw {{
    r1 = [x]_{r}; r2 = [x]_{r}; ret (r1, r2)
  }} {{
    r3 = [x]_{r}; r4 = [x]_{r}; ret (r3, r4)
  }}
}}"""
    vals = (0, 1, 2)

    def coherent(a, b):
        # two successive reads never go back in modification order 0 < 1|2
        return not (a != 0 and b == 0)

    expected = set()
    for r1, r2, r3, r4 in product(vals, repeat=4):
        if not (coherent(r1, r2) and coherent(r3, r4)):
            continue
        if (r1, r2, r3, r4) in ((1, 2, 2, 1), (2, 1, 1, 2)):
            continue
        expected.add((r1, r2, r3, r4))
    return _test(name, aspects, expected, prog, observe=(2, 3, 4, 5),
                 notes="Expanded: every pair of successive reads respects some modification order "
                       "of x; the two cross-ordered tuples are excluded.")


def _iriw(name, aspects, w, r, forbidden):
    prog = f"""
[x]_{w} := 0; [y]_{w} := 0;
spw {{
  spw {{ [x]_{w} := 1; ret 0 }} {{ [y]_{w} := 1; ret 0 }}
}} {{
  spw {{
    r1 = [x]_{r}; r2 = [y]_{r}; ret (r1, r2)
  }} {{
    r3 = [y]_{r}; r4 = [x]_{r}; ret (r3, r4)
  }}
}}"""
    expected = _cross((0, 1), (0, 1), (0, 1), (0, 1)) - frozenset(forbidden)
    return _test(name, aspects, expected, prog, observe=(2, 3, 4, 5))


def _wrc(name, aspects, init, t1, t2, t3, expected, notes=""):
    prog = f"""
{init}
spw {{
  {t1};
  ret 0
}} {{
  spw {{
    {t2}
  }} {{
    r1 = [y]_{t3}; r2 = [x]_{t3}; ret (r1, r2)
  }}
}}"""
    return _test(name, aspects, expected, prog, observe=(2, 3), notes=notes)


def _wr(name, aspects, w1, w2, r):
    prog = f"""
[x]_{w1} := 0; [y]_{w1} := 0;
spw {{
  [x]_{w1} := 1; [y]_{w2} := 2; ret 0
}} {{
  [y]_{w1} := 1; [x]_{w2} := 2; ret 0
}};
r1 = [x]_{r}; r2 = [y]_{r};
ret (r1, r2)"""
    return _test(name, aspects, {(1, 1), (1, 2), (2, 1), (2, 2)}, prog,
                 notes="The listing gives three outcomes while the prose discussion of the same shape "
                       "calls r1 = r2 = 1 valid; the golden set is the explored one.")


CORPUS: tuple[LitmusTest, ...] = (
    # --- store buffering -------------------------------------------------
    _sb("SB_rel+acq", "", "[x]_rel := 0; [y]_rel := 0;",
        ("[x]_rel := 1", "[y]_acq"), ("[y]_rel := 1", "[x]_acq"), _ALL2),
    _sb("SB_sc", "sc", "[x]_sc := 0; [y]_sc := 0;",
        ("[x]_sc := 1", "[y]_sc"), ("[y]_sc := 1", "[x]_sc"), _ALL2 - {(0, 0)}),
    _sb("SB_sc+rel", "sc", "[x]_sc := 0; [y]_sc := 0;",
        ("[x]_rel := 1", "[y]_sc"), ("[y]_sc := 1", "[x]_sc"), _ALL2),
    _sb("SB_sc+acq", "sc", "[x]_sc := 0; [y]_sc := 0;",
        ("[x]_sc := 1", "[y]_acq"), ("[y]_sc := 1", "[x]_sc"), _ALL2),
    # --- load buffering --------------------------------------------------
    _lb("LB_rlx", "po", "rlx", "rlx", "rlx", "rlx", _ALL2),
    _lb("LB_rel+rlx", "po", "rlx", "rel", "rlx", "rel", _ALL2),
    _lb("LB_acq+rlx", "po", "acq", "rlx", "acq", "rlx", _ALL2 - {(1, 1)}, c11=True,
        notes="An acquire read is never reordered with a later write, so (1, 1) is absent "
              "although C11 admits it."),
    _lb("LB_rel+acq+rlx", "po,arr", "acq", "rlx", "rlx", "rel", _ALL2 - {(1, 1)}),
    _test("LB_rlx+use", "po", _ALL2, """
[x]_rlx := 0; [y]_rlx := 0;
spw {
  r1 = [y]_rlx;
  [z1]_rlx := r1;
  [x]_rlx := 1;
  ret r1
} {
  r2 = [x]_rlx;
  [z2]_rlx := r2;
  [y]_rlx := 1;
  ret r2
}"""),
    _test("LB_rlx+let", "po", {(a, a + 1, b, b + 1) for a in (0, 1) for b in (0, 1)}, """
[x]_rlx := 0; [y]_rlx := 0;
spw {
  r1 = [y]_rlx;
  q1 = r1 + 1;
  [x]_rlx := 1;
  ret (r1, q1)
} {
  r2 = [x]_rlx;
  q2 = r2 + 1;
  [y]_rlx := 1;
  ret (r2, q2)
}"""),
    _lb_join("LB_rlx+join", "rlx", "rlx", _ALL2),
    _lb_join("LB_rel+rlx+join", "rlx", "rel", _ALL2),
    _lb_join("LB_acq+rlx+join", "acq", "rlx", _ALL2 - {(1, 1)}, c11=True,
             notes="Acquire reads keep later writes in place even across a join, so (1, 1) "
                   "is absent; the listing names it as the C11 outcome."),
    # --- message passing -------------------------------------------------
    _mp("MP_rlx+na", "na", "rlx", "rlx", "rlx", set(), True, notes=_RACY_MP),
    _mp("MP_rel+rlx+na", "na", "rlx", "rel", "rlx", set(), True, notes=_RACY_MP),
    _mp("MP_rlx+acq+na", "na", "rlx", "rlx", "acq", set(), True, notes=_RACY_MP),
    _mp("MP_rel+acq+na", "na,po,arr", "rel", "rel", "acq", {(5,)}, False),
    _test("MP_rel+acq+na+rlx", "wf,na,po,arr", {(5,)}, """
[f]_rel := 0; [d]_na := 0;
spw {
  [d]_na := 5;
  [f]_rel := 1;
  [f]_rlx := 2;
  ret 0
} {
  repeat v = [f]_acq; ret v == 2 end;
  r1 = [d]_na;
  ret r1
}""", observe=(1,)),
    _test("MP_rel+acq+na+rlx_2", "wf,na,po,arr", {(5, 0), (5, 1)}, """
[f]_na := 0; [d]_na := 0; [x]_na := 0;
spw {
  [d]_na := 5;
  [f]_rel := 1;
  [x]_rel := 1;
  [f]_rlx := 2;
  ret 0
} {
  repeat v = [f]_acq; ret v == 2 end;
  r1 = [d]_na;
  r2 = [x]_rlx;
  ret (r1, r2)
}""", observe=(1, 2)),
    _test("MP_con+na", "na,cr", {(0,), (5,)}, """
[f]_rlx := null; [d]_na := 0;
spw {
  [d]_na := 5;
  [f]_rel := d;
  ret 0
} {
  r0 = [f]_con;
  if r0 != null then r1 = [r0]_na; ret r1 else ret 0 fi
}""", observe=(1,), notes="The listing initialises f with a consume write, which is not a write mode; "
                           "a relaxed write is used."),
    _test("MP_con+na_2", "na,cr", {(0, 0), (1, 0), (1, 1)}, """
[p]_na := null; [d]_na := 0; [x]_na := 0;
spw {
  [x]_rlx := 1;
  [d]_na := 1;
  [p]_rel := d;
  ret 0
} {
  r1 = [p]_con;
  if r1 != null then
    r2 = [r1]_na; r3 = [x]_rlx; ret (r2, r3)
  else
    ret (0, 0)
  fi
}""", observe=(1, 2), notes="The listing writes 1 to d but names r2 = 5; the golden set follows "
                             "the program (r2 = 1 when the pointer is seen)."),
    _mp_cas("MP_cas+rel+acq+na", "na,po,arr", "acq", False, {(0, 1), (1, 0), (1, 1)}),
    _mp_cas("MP_cas+rel+rlx+na", "na", "rlx", True, {(1, 1)}),
    # --- coherence of read-read ------------------------------------------
    _corr("CoRR_rlx", "", "rlx", "rlx"),
    _corr("CoRR_rel+acq", "", "rel", "acq"),
    # --- independent reads of independent writes -------------------------
    _iriw("IRIW_rlx", "", "rlx", "rlx", ()),
    _iriw("IRIW_rel+acq", "", "rel", "acq", ()),
    _iriw("IRIW_sc", "sc", "sc", "sc", {(1, 0, 1, 0)}),
    # --- write-to-read causality -----------------------------------------
    _wrc("WRC_rlx", "", "[x]_rlx := 0; [y]_rlx := 0;", "[x]_rlx := 1",
         "r0 = [x]_rlx; [y]_rlx := r0; ret 0", "rlx", _ALL2),
    _wrc("WRC_rel+acq", "", "[x]_rel := 0; [y]_rel := 0;", "[x]_rel := 1",
         "r0 = [x]_acq; [y]_rel := r0; ret 0", "acq", _ALL2 - {(1, 0)}),
    _wrc("WRC_cas+rel", "po,arr", "[x]_rel := 0; [y]_rel := 0;", "[x]_rel := 1; [y]_rel := 1",
         "cas_{rel,acq}(y, 1, 2); ret 0", "acq", {(0, 0), (0, 1), (1, 1), (2, 1)},
         notes="The listing gives the observer's reads a release modifier, which reads do not "
               "take; acquire reads are used."),
    _wrc("WRC_cas+rlx", "", "[x]_rlx := 0; [y]_rlx := 0;", "[x]_rlx := 1; [y]_rel := 1",
         "cas_{rlx,rlx}(y, 1, 2); ret 0", "acq", {(0, 0), (0, 1), (1, 1), (2, 1)},
         notes="The observer reads are acquire reads so the release sequence through the "
               "relaxed CAS is what forbids (2, 0)."),
    # --- out of thin air -------------------------------------------------
    _test("OTA_lb", "po", {(0, 0)}, """
[x]_rlx := 0; [y]_rlx := 0;
spw {
  r1 = [y]_rlx;
  [x]_rlx := r1;
  ret r1
} {
  r2 = [x]_rlx;
  [y]_rlx := r2;
  ret r2
}""", c11=True, notes="C11 admits arbitrary values here."),
    _test("OTA_if", "po", {(0, 0)}, """
[x]_rlx := 0; [y]_rlx := 0;
spw {
  r1 = [y]_rlx;
  if r1 then [x]_rlx := 1 else ret 0 fi;
  ret r1
} {
  r2 = [x]_rlx;
  if r2 then [y]_rlx := 1 else ret 0 fi;
  ret r2
}""", c11=True, notes="C11 admits r1 = r2 = 1."),
    # --- write reorder ---------------------------------------------------
    _wr("WR_rlx", "po", "rlx", "rlx", "rlx"),
    _wr("WR_rlx+rel", "po,arr", "rlx", "rel", "rlx"),
    _wr("WR_rel", "po,arr", "rel", "rel", "acq"),
    # --- speculative execution -------------------------------------------
    _test("SE_simple", "po", {(0,), (1,)}, """
[x]_rlx := 0; [y]_rlx := 0; [z]_rlx := 0;
spw {
  r1 = [x]_rlx;
  if r1 then [z]_rlx := 1; [y]_rlx := 1 else [y]_rlx := 1 fi
} {
  r2 = [y]_rlx;
  if r2 then [x]_rlx := 1 else ret 0 fi
};
r0 = [z]_rlx;
ret r0"""),
    _test("SE_prop", "po", {(0,), (1,)}, """
[x]_rlx := 0; [y]_rlx := 0; [z]_rlx := 0;
spw {
  r1 = [x]_rlx;
  if r1 then [z]_rlx := 1; q = [z]_rlx; [y]_rlx := q else [y]_rlx := 1 fi
} {
  r2 = [y]_rlx;
  if r2 then [x]_rlx := 1 else ret 0 fi
};
r0 = [z]_rlx;
ret r0"""),
    _test("SE_nested", "po", {(0,), (1,)}, """
[x]_rlx := 0; [y]_rlx := 0; [z]_rlx := 0; [f]_rlx := 0;
spw {
  r1 = [x]_rlx;
  if r1 then
    r2 = [f]_rlx;
    if r2 then [z]_rlx := 1; [y]_rlx := 1 else [y]_rlx := 1 fi
  else
    [y]_rlx := 1
  fi
} {
  r3 = [y]_rlx;
  if r3 then [f]_rlx := 1; [x]_rlx := 1 else ret 0 fi
};
r0 = [z]_rlx;
ret r0"""),
    # --- locks -----------------------------------------------------------
    _test("Dekker", "na", {(0, 1), (1, 0), (1, 1)}, """
[x]_rel := 0; [y]_rel := 0; [d]_na := 0;
spw {
  [x]_rel := 1;
  r1 = [y]_acq;
  if r1 == 0 then [d]_na := 5 else ret 0 fi;
  ret r1
} {
  [y]_rel := 1;
  r2 = [x]_acq;
  if r2 == 0 then [d]_na := 6 else ret 0 fi;
  ret r2
}""", stuck=True, notes="When both threads read 0 they race on d, so (0, 0) never terminates."),
    _test("Cohen", "na", {(0, 0)}, """
[x]_rel := 0; [y]_rel := 0; [d]_na := 0;
spw {
  [x]_rel := choice 1 2;
  repeat [y]_acq end;
  r1 = [x]_acq;
  r2 = [y]_acq;
  if r1 == r2 then [d]_na := 5 else ret 0 fi;
  ret 0
} {
  [y]_rel := choice 1 2;
  repeat [x]_acq end;
  r3 = [x]_acq;
  r4 = [y]_acq;
  if r3 != r4 then [d]_na := 6 else ret 0 fi;
  ret 0
}""", notes="Exactly one thread enters the critical section."),
)


def load_suite(pattern: str | None = None) -> list[LitmusTest]:
    """The built-in corpus, optionally filtered by a regular expression
    searched in the test names."""
    if not pattern:
        return list(CORPUS)
    rx = re.compile(pattern)
    return [t for t in CORPUS if rx.search(t.name)]


def get_test(name: str) -> LitmusTest:
    for t in CORPUS:
        if t.name == name:
            return t
    raise KeyError(name)


# ---------------------------------------------------------------------------
# External test files
# ---------------------------------------------------------------------------


class LitmusFormatError(ValueError):
    pass


def dump_test(t: LitmusTest) -> str:
    lines = [f"name: {t.name}", f"aspects: {t.aspects.to_flags()}"]
    if t.observe is not None:
        lines.append("observe: " + ", ".join(str(i) for i in t.observe))
    for o in sorted_outcomes(t.expected):
        lines.append(f"expect: {format_outcome(o)}")
    if t.expect_stuck:
        lines.append("expect: stuck")
    return "\n".join(lines) + "\n\n" + t.program.text


def parse_outcome(text: str) -> tuple:
    from .parser import parse_expr
    from .lang import eval_single

    v = eval_single(parse_expr(text))
    return leaves(v)


def load_test_file(text: str, origin: str = "<litmus>") -> LitmusTest:
    """Parse a test file: ``key: value`` header lines, a blank line, then
    the program."""
    header, sep, body = text.partition("\n\n")
    if not sep:
        raise LitmusFormatError(f"{origin}: missing blank line between header and program")
    name, aspects, observe = None, "", None
    expected, stuck = set(), False
    for raw in header.splitlines():
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        key, colon, value = line.partition(":")
        if not colon:
            raise LitmusFormatError(f"{origin}: malformed header line {raw!r}")
        key, value = key.strip(), value.strip()
        if key == "name":
            name = value
        elif key == "aspects":
            aspects = value
        elif key == "observe":
            observe = tuple(int(x) for x in value.split(",") if x.strip())
        elif key == "expect":
            if value == "stuck":
                stuck = True
            else:
                expected.add(parse_outcome(value))
        else:
            raise LitmusFormatError(f"{origin}: unknown header key {key!r}")
    if name is None:
        raise LitmusFormatError(f"{origin}: missing name")
    return LitmusTest(name, SourceProgram(body, origin), AspectConfig.from_flags(aspects),
                      frozenset(expected), stuck, observe)
