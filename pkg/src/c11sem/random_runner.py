"""Seeded single-path execution of the step relation.

At every step the successors are canonicalized, deduplicated and put in a
fixed order, so the seeded choice does not depend on how the semantics
happens to enumerate rules.  A stuck successor ends the run immediately.

Programs whose threads spin forever once the others have finished (a
waiting loop whose condition can no longer change) are detected: when the
run revisits a configuration, a bounded exploration from the current one
decides whether any exit is still reachable.  Such runs end with the
result ``diverged`` instead of burning the whole fuel.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .explorer import Trace, TraceStep, canonical_config, config_dump
from .lang import Stmt, Stuck, Value, format_value
from .semantics import Config, StepResult, initial_config, is_terminal, outcome_of, step
from .state import AspectConfig

DEFAULT_FUEL = 1_000_000
TRAP_BUDGET = 20_000


class ReplayMismatch(AssertionError):
    """A replayed run diverged from its report (a determinism leak)."""


@dataclass
class RunReport:
    seed: int
    steps: int
    kind: str  # "value", "stuck", "fuel-exhausted", "deadlock" or "diverged"
    value: Value | None = None
    stuck_rule: str | None = None
    trace: Trace | None = field(default=None, repr=False)
    final: Config | None = field(default=None, repr=False)

    @property
    def result(self) -> str:
        if self.kind == "value":
            return format_value(self.value)
        if self.kind == "stuck":
            return f"stuck({self.stuck_rule})"
        return self.kind

    @property
    def stuck(self) -> bool:
        return self.kind == "stuck"

    def header(self) -> str:
        return f"seed={self.seed} steps={self.steps} result={self.result}"

    def serialize(self, with_states: bool = False) -> str:
        lines = [self.header()]
        if self.trace is not None:
            lines.extend(self.trace.lines(with_states))
        return "\n".join(lines)


class TransitionCache:
    """Memoized ordered successor lists, keyed by canonical configuration.

    Sharing a cache between runs of the same program and aspect set changes
    nothing observable; it only avoids recomputing transitions.
    """

    def __init__(self, max_entries: int = 2_000_000):
        self._table: dict = {}
        self.max_entries = max_entries

    def __len__(self) -> int:
        return len(self._table)

    def successors(self, c: Config) -> list[StepResult]:
        key = c.key()
        hit = self._table.get(key)
        if hit is None:
            hit = ordered_successors(c)
            if len(self._table) < self.max_entries:
                self._table[key] = hit
        return hit


def _order_key(r: StepResult) -> tuple:
    return (r.path, r.rule, r.note)


def ordered_successors(c: Config) -> list[StepResult]:
    """Canonical successors of ``c``, deduplicated, in a fixed order:
    by thread path, rule and note, ties broken by the canonical dump."""
    seen: dict = {}
    for r in step(c):
        nc = canonical_config(r.config)
        key = nc.key()
        if key not in seen:
            seen[key] = StepResult(nc, r.rule, r.path, r.note)
    out = list(seen.values())
    out.sort(key=_order_key)
    for i in range(len(out) - 1):
        if _order_key(out[i]) == _order_key(out[i + 1]):
            out.sort(key=lambda r: (_order_key(r), config_dump(r.config)))
            break
    return out


def _trapped(c: Config, succ, budget: int) -> bool:
    """True iff no terminal, stuck or blocked configuration is reachable
    from ``c`` (checked exhaustively up to ``budget`` configurations)."""
    seen = {c.key()}
    queue = deque([c])
    while queue:
        cur = queue.popleft()
        if isinstance(cur.stmt, Stuck):
            return False
        nxt = succ(cur)
        if not nxt:
            return False
        for r in nxt:
            k = r.config.key()
            if k not in seen:
                if len(seen) >= budget:
                    return False
                seen.add(k)
                queue.append(r.config)
    return True


def random_run(s: Stmt, aspects: AspectConfig | None = None, seed: int = 0, fuel: int = DEFAULT_FUEL,
               cache: TransitionCache | None = None, record: bool = True, detect_divergence: bool = True,
               trap_budget: int = TRAP_BUDGET) -> RunReport:
    """Follow one seeded path from the initial configuration."""
    rng = random.Random(seed)
    succ = cache.successors if cache is not None else ordered_successors
    init = canonical_config(initial_config(s, aspects))
    c = init
    steps: list[TraceStep] = []
    seen: set[int] = set()
    revisits, next_check = 0, 16
    n = 0

    def report(kind, **kw) -> RunReport:
        trace = Trace(init, tuple(steps)) if record else None
        return RunReport(seed, n, kind, trace=trace, final=c, **kw)

    while True:
        nxt = succ(c)
        if not nxt:
            if is_terminal(c):
                return report("value", value=outcome_of(c))
            return report("deadlock")
        for r in nxt:
            if isinstance(r.config.stmt, Stuck):
                n += 1
                if record:
                    steps.append(TraceStep(r.rule, r.path, r.note))
                c = r.config
                return report("stuck", stuck_rule=r.rule)
        if n >= fuel:
            return report("fuel-exhausted")
        if detect_divergence:
            h = hash(c.key())
            if h in seen:
                revisits += 1
                if revisits >= next_check:
                    next_check *= 2
                    if _trapped(c, succ, trap_budget):
                        return report("diverged")
            else:
                seen.add(h)
        r = nxt[rng.randrange(len(nxt))] if len(nxt) > 1 else nxt[0]
        if record:
            steps.append(TraceStep(r.rule, r.path, r.note))
        c = r.config
        n += 1


def replay(report: RunReport, s: Stmt, aspects: AspectConfig | None = None, fuel: int = DEFAULT_FUEL,
           cache: TransitionCache | None = None) -> RunReport:
    """Re-run with the report's seed and insist on an identical trace."""
    again = random_run(s, aspects, report.seed, fuel, cache=cache, record=True)
    if again.serialize() != report.serialize():
        raise ReplayMismatch(f"replay of seed {report.seed} differs from the recorded run")
    return again
