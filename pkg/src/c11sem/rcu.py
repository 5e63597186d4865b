"""Quiescent-state-based RCU over a three-node list, with bug injections.

A writer publishes the list a -> b -> c (values 1, 10, 100), then replaces
the second node by d (value 1000) and reclaims b after synchronizing with
two readers.  Each reader sums the list twice, announcing itself on- and
offline around each traversal.  The language has no procedures, so the
helper routines are expanded inline with fresh local names.

Bug variants:

* ``noSyncLoops``: the writer does not wait for the readers before
  ``delete``, so a reader may touch the reclaimed node.
* ``appendRelToRlx``: the link write in ``append`` is relaxed.
* ``lheadRelToRlx``: the publication of the list head is relaxed.
* ``traverseAcqToRlx``: the reader's pointer-chasing reads are relaxed.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

from .lang import Lit, Par, Ret, Stmt
from .litmus import leaves
from .parser import parse
from .random_runner import DEFAULT_FUEL, RunReport, TransitionCache, random_run
from .state import AspectConfig

VARIANTS = ("correct", "noSyncLoops", "appendRelToRlx", "lheadRelToRlx", "traverseAcqToRlx")
ADMISSIBLE_SUMS = frozenset({0, 1, 11, 111, 1101})
RCU_ASPECTS = AspectConfig.from_flags({"sc", "na", "wf", "dealloc"})
BUG_RULES = frozenset({
    "Read-Uninit", "ReadNA-stuck1", "ReadNA-stuck2", "WriteNA-stuck1", "WriteNA-stuck2", "Retired-Access",
})


@dataclass(frozen=True)
class RcuVariant:
    kind: str = "correct"

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValueError(f"unknown RCU variant {self.kind!r}; expected one of {', '.join(VARIANTS)}")


class _Inliner:
    def __init__(self, variant: RcuVariant):
        self.v = variant.kind
        self.fresh = itertools.count(1)

    def names(self, *bases: str) -> list[str]:
        n = next(self.fresh)
        return [f"{b}_{n}" for b in bases]

    def append(self, loc: str, value: int, ltail: str) -> str:
        rt, rtc = self.names("rt", "rtc")
        link = "rlx" if self.v == "appendRelToRlx" else "rel"
        return (f"[{loc}]_rlx := ({value}, null);\n"
                f"{rt} = [{ltail}]_na;\n"
                f"{rtc} = [{rt}]_rlx;\n"
                f"[{rt}]_{link} := (fst {rtc}, {loc});\n"
                f"[{ltail}]_na := {loc}")

    def update_second_node(self, loc: str, value: int) -> str:
        r1, r1c, r2, r2c, r3 = self.names("r1", "r1c", "r2", "r2c", "r3")
        return (f"{r1} = [lhead]_rlx;\n"
                f"{r1c} = [{r1}]_rlx;\n"
                f"{r2} = snd {r1c};\n"
                f"{r2c} = [{r2}]_rlx;\n"
                f"{r3} = snd {r2c};\n"
                f"[{loc}]_rel := ({value}, {r3});\n"
                f"[{r1}]_rel := (fst {r1c}, {loc});\n"
                f"{self.sync('cw', 'cr1', 'cr2')};\n"
                f"delete {r2}")

    def sync(self, cw: str, cr1: str, cr2: str) -> str:
        rcw, rcwn = self.names("rcw", "rcwn")
        text = (f"{rcw} = [{cw}]_rlx;\n"
                f"{rcwn} = {rcw} + 2;\n"
                f"[{cw}]_rel := {rcwn}")
        if self.v != "noSyncLoops":
            text += f";\n{self.sync_with_reader(rcwn, cr1)};\n{self.sync_with_reader(rcwn, cr2)}"
        return text

    def sync_with_reader(self, rcwn: str, cr: str) -> str:
        (v,) = self.names("rc")
        return f"repeat {v} = [{cr}]_acq; ret {v} >= {rcwn} end"

    def rcu_online(self, cw: str, cr: str) -> str:
        (v,) = self.names("on")
        return f"{v} = [{cw}]_acq;\n[{cr}]_rlx := {v} + 1"

    def rcu_offline(self, cw: str, cr: str) -> str:
        (v,) = self.names("off")
        return f"{v} = [{cw}]_rlx;\n[{cr}]_rel := {v}"

    def traverse(self, lhead: str, cur: str, res: str) -> str:
        rh, rcur, rnode, rres, rval = self.names("rh", "rCurNode", "rNode", "rRes", "rVal")
        chase = "rlx" if self.v == "traverseAcqToRlx" else "acq"
        return (f"{rh} = [{lhead}]_{chase};\n"
                f"[{cur}]_na := {rh};\n"
                f"repeat\n"
                f"  {rcur} = [{cur}]_na;\n"
                f"  if ({rcur} != null)\n"
                f"  then {rnode} = [{rcur}]_{chase};\n"
                f"       {rres} = [{res}]_na;\n"
                f"       {rval} = fst {rnode};\n"
                f"       [{res}]_na := {rval} + {rres};\n"
                f"       [{cur}]_na := snd {rnode};\n"
                f"       ret 0\n"
                f"  else ret 1\n"
                f"  fi\n"
                f"end")

    def reader(self, i: int) -> str:
        cr, cur = f"cr{i}", f"cur{i}"
        parts = []
        for j in (1, 2):
            total = f"sum{i}{j}"
            parts.append(f"[{total}]_na := 0;\n"
                         f"{self.rcu_online('cw', cr)};\n"
                         f"{self.traverse('lhead', cur, total)};\n"
                         f"{self.rcu_offline('cw', cr)}")
        parts.append(f"r{i}1 = [sum{i}1]_na;\nr{i}2 = [sum{i}2]_na;\nret (r{i}1, r{i}2)")
        return ";\n".join(parts)

    def writer(self) -> str:
        publish = "rlx" if self.v == "lheadRelToRlx" else "rel"
        return (f"[a]_rlx := (1, null);\n"
                f"[ltail]_na := a;\n"
                f"[lhead]_{publish} := a;\n"
                f"{self.append('b', 10, 'ltail')};\n"
                f"{self.append('c', 100, 'ltail')};\n"
                f"{self.update_second_node('d', 1000)}")


def rcu_source(variant: RcuVariant | str = "correct") -> str:
    """Concrete syntax of the whole program for a variant."""
    if isinstance(variant, str):
        variant = RcuVariant(variant)
    inl = _Inliner(variant)
    writer = inl.writer()
    r1 = inl.reader(1)
    r2 = inl.reader(2)
    indent = lambda s: "\n".join("  " + ln for ln in s.splitlines())  # noqa: E731
    return (f"// RCU variant: {variant.kind}\n"
            "[cw]_na := 0; [cr1]_na := 0; [cr2]_na := 0; [lhead]_na := null;\n"
            f"spw {{\n{indent(writer)}\n}} {{\n"
            f"  spw {{\n{indent(indent(r1))}\n  }} {{\n{indent(indent(r2))}\n  }}\n}}\n")


def build_rcu(variant: RcuVariant | str = "correct") -> Stmt:
    return parse(rcu_source(variant), origin=f"<rcu {variant if isinstance(variant, str) else variant.kind}>")


# ---------------------------------------------------------------------------
# Invariants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RcuVerdict:
    status: str  # "pass", "fail", "stuck", "incomplete"
    sums: tuple[int, int, int, int] | None = None
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "pass"


def check_sums(sums: tuple[int, int, int, int]) -> RcuVerdict:
    """Admissible list sums and per-reader monotonicity."""
    r11, r12, r21, r22 = sums
    bad = [s for s in sums if s not in ADMISSIBLE_SUMS]
    if bad:
        return RcuVerdict("fail", sums, f"sum {bad[0]} is not a sum of a list version")
    if r11 > r12:
        return RcuVerdict("fail", sums, "reader 1 saw an older list the second time")
    if r21 > r22:
        return RcuVerdict("fail", sums, "reader 2 saw an older list the second time")
    return RcuVerdict("pass", sums)


def _reader_results(report: RunReport) -> tuple[int, int, int, int] | None:
    """The four sums, from the final value or, for a run whose writer spins
    forever, from the two finished reader threads."""
    if report.kind == "value":
        return tuple(leaves(report.value)[-4:])
    c = report.final
    if report.kind == "diverged" and c is not None and isinstance(c.stmt, Par):
        readers = c.stmt.right
        parts = [readers.left, readers.right] if isinstance(readers, Par) else [readers]
        if all(isinstance(t, Ret) and isinstance(t.expr, Lit) for t in parts):
            return tuple(x for t in parts for x in leaves(t.expr.value))
    return None


def check_rcu_invariants(report: RunReport) -> RcuVerdict:
    if report.kind == "stuck":
        return RcuVerdict("stuck", reason=report.stuck_rule or "")
    sums = _reader_results(report)
    if sums is None:
        return RcuVerdict("incomplete", reason=report.kind)
    return check_sums(sums)


# ---------------------------------------------------------------------------
# Campaigns
# ---------------------------------------------------------------------------


@dataclass
class RunRow:
    index: int
    seed: int
    report: RunReport
    verdict: RcuVerdict
    seconds: float


@dataclass
class CampaignSummary:
    variant: str
    rows: list[RunRow] = field(default_factory=list)

    @property
    def stuck_count(self) -> int:
        return sum(r.report.kind == "stuck" for r in self.rows)

    @property
    def invariant_failures(self) -> int:
        return sum(r.verdict.status == "fail" for r in self.rows)

    @property
    def incomplete(self) -> int:
        return sum(r.verdict.status == "incomplete" for r in self.rows)

    @property
    def runtimes(self) -> list[float]:
        return [r.seconds for r in self.rows]

    @property
    def stuck_rules(self) -> set[str]:
        return {r.report.stuck_rule for r in self.rows if r.report.kind == "stuck"}

    def table(self) -> str:
        lines = [f"variant {self.variant}",
                 f"{'run':>4} {'seed':>8} {'r11':>6} {'r12':>6} {'r21':>6} {'r22':>6}  {'result':<28} {'time(s)':>8}"]
        for r in self.rows:
            sums = r.verdict.sums or ("-",) * 4
            rep = r.report
            if rep.kind == "stuck":
                result = f"stuck ({rep.stuck_rule})"
            elif rep.kind == "diverged":
                result = "writer waits forever"
            else:
                result = rep.kind if rep.kind != "value" else "ok"
            if r.verdict.status == "fail":
                result += " INVARIANT FAILURE"
            lines.append(f"{r.index:>4} {r.seed:>8} " + " ".join(f"{str(s):>6}" for s in sums)
                         + f"  {result:<28} {r.seconds:>8.2f}")
        lines.append(f"stuck: {self.stuck_count}/{len(self.rows)}  invariant failures: {self.invariant_failures}"
                     f"  max time: {max(self.runtimes, default=0.0):.2f}s")
        return "\n".join(lines)


def campaign(variant: RcuVariant | str, runs: int, seed_base: int = 0, fuel: int = DEFAULT_FUEL,
             aspects: AspectConfig = RCU_ASPECTS, progress=None) -> CampaignSummary:
    """``runs`` seeded random runs (seeds ``seed_base``, ``seed_base + 1``, ...)."""
    if isinstance(variant, str):
        variant = RcuVariant(variant)
    prog = build_rcu(variant)
    cache = TransitionCache(max_entries=200_000)
    summary = CampaignSummary(variant.kind)
    for i in range(runs):
        seed = seed_base + i
        start = time.perf_counter()
        rep = random_run(prog, aspects, seed, fuel, cache=cache, record=False)
        row = RunRow(i + 1, seed, rep, check_rcu_invariants(rep), time.perf_counter() - start)
        summary.rows.append(row)
        if progress is not None:
            progress(row)
    return summary


__all__ = [
    "ADMISSIBLE_SUMS", "BUG_RULES", "RCU_ASPECTS", "VARIANTS", "CampaignSummary", "RcuVariant", "RcuVerdict",
    "RunRow", "build_rcu", "campaign", "check_rcu_invariants", "check_sums", "rcu_source",
]
