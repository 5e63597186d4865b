"""Exhaustive breadth-first enumeration of reachable configurations.

Configurations are deduplicated on a canonical form in which symbolic
values are renumbered in first-occurrence order, so two states that differ
only in fresh-symbol numbering are explored once.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .lang import Expr, Stmt, Stuck, Sym, ordered_syms, stmt_syms, subst_syms
from .printer import print_stmt
from .state import AspectConfig, IfRec, MachineState, dump_state, entry_exprs, subst_buffer
from .semantics import Config, StepResult, initial_config, is_terminal, outcome_of, step

DEFAULT_MAX_STATES = 5_000_000
DEFAULT_MAX_DEPTH = 10_000


# ---------------------------------------------------------------------------
# Canonical forms
# ---------------------------------------------------------------------------


def _buffer_order(buf, out: list[int]) -> None:
    for e in buf:
        if e.sym not in out:
            out.append(e.sym)
        for x in entry_exprs(e):
            ordered_syms(x, out)
        if isinstance(e, IfRec):
            _buffer_order(e.then, out)
            _buffer_order(e.else_, out)


def canonical_config(c: Config) -> Config:
    """Rename symbolic values to 0, 1, ... in first-occurrence order
    (statement, then buffers by thread path, then Γ) and reset the fresh
    counter accordingly."""
    st = c.state
    order = stmt_syms(c.stmt)
    for p in sorted(st.bufs):
        _buffer_order(st.bufs[p], order)
    for g in sorted(st.gamma):
        if g[2] not in order:
            order.append(g[2])
    k = len(order)
    if all(old == new for new, old in enumerate(order)):
        if st.counter == k:
            return c
        return Config(c.stmt, st.with_(counter=k))
    rename = {old: new for new, old in enumerate(order)}
    mapping: dict[int, Expr] = {old: Sym(new) for old, new in rename.items()}
    stmt = subst_syms(c.stmt, mapping)
    bufs = {p: subst_buffer(b, mapping, rename) for p, b in st.bufs.items()}
    gamma = frozenset((loc, tau, rename[s]) for loc, tau, s in st.gamma)
    return Config(stmt, st.with_(bufs=bufs, gamma=gamma, counter=k))


def config_dump(c: Config) -> str:
    """Line-oriented rendering of a configuration."""
    return "program: " + print_stmt(c.stmt) + "\n" + dump_state(c.state)


def canonicalize(c: Config) -> bytes:
    """A byte string identifying ``c`` up to renaming of symbolic values."""
    return config_dump(canonical_config(c)).encode()


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


def format_path(path: str) -> str:
    return path if path else "-"


@dataclass(frozen=True)
class TraceStep:
    rule: str
    path: str
    note: str = ""

    def line(self, n: int) -> str:
        note = f" [{self.note}]" if self.note else ""
        return f"step {n}: {self.rule} @ {format_path(self.path)}{note}"


@dataclass(frozen=True)
class Trace:
    initial: Config
    steps: tuple[TraceStep, ...]
    configs: tuple[Config, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def lines(self, with_states: bool = False) -> list[str]:
        out = []
        for n, s in enumerate(self.steps, 1):
            out.append(s.line(n))
            if with_states and n <= len(self.configs):
                out.extend("  " + ln for ln in config_dump(self.configs[n - 1]).splitlines())
        return out

    def format(self, with_states: bool = False) -> str:
        return "\n".join(self.lines(with_states))

    def final(self) -> Config:
        return self.configs[-1] if self.configs else self.initial


def successors(c: Config) -> list[StepResult]:
    """Successors of a canonical config, each canonicalized."""
    return [StepResult(canonical_config(r.config), r.rule, r.path, r.note) for r in step(c)]


class NoSuchStep(LookupError):
    pass


def follow(c: Config, rule: str, path: str = "", note: str | None = None) -> Config:
    """The successor of ``c`` reached by ``rule`` at thread ``path`` (and
    with the given note, when several transitions share rule and path)."""
    hits = [r for r in successors(c)
            if r.rule == rule and r.path == path and (note is None or r.note == note)]
    keys = {r.config.key() for r in hits}
    if not hits:
        avail = ", ".join(f"{r.rule}@{format_path(r.path)}[{r.note}]" for r in successors(c))
        raise NoSuchStep(f"no {rule} step at {format_path(path)}; enabled: {avail}")
    if len(keys) > 1:
        raise NoSuchStep(f"{rule} at {format_path(path)} is ambiguous: "
                         + ", ".join(sorted({r.note for r in hits})))
    return hits[0].config


def replay_trace(trace: Trace) -> bool:
    """Check every recorded step is an enabled transition of its predecessor."""
    cur = canonical_config(trace.initial)
    for i, s in enumerate(trace.steps):
        target = trace.configs[i].key() if i < len(trace.configs) else None
        found = None
        for r in successors(cur):
            if (r.rule, r.path, r.note) == (s.rule, s.path, s.note):
                if target is None or r.config.key() == target:
                    found = r.config
                    break
        if found is None:
            return False
        cur = found
    return True


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------


@dataclass
class ExplorationResult:
    outcomes: set = field(default_factory=set)
    stuck_reports: set = field(default_factory=set)  # (rule, trace id)
    state_count: int = 0
    truncated: bool = False
    deadlocks: list = field(default_factory=list)  # trace ids
    outcome_witness: dict = field(default_factory=dict)  # value -> trace id
    _initial: Config | None = None
    _parents: list = field(default_factory=list)  # id -> (parent id, TraceStep | None)
    _configs: dict = field(default_factory=dict)  # id -> Config (terminal and stuck only)

    @property
    def stuck_reachable(self) -> bool:
        return bool(self.stuck_reports)

    @property
    def stuck_rules(self) -> set[str]:
        return {r for r, _ in self.stuck_reports}

    def trace(self, node: int) -> Trace:
        steps = []
        while True:
            parent, ts = self._parents[node]
            if ts is None:
                break
            steps.append(ts)
            node = parent
        steps.reverse()
        return Trace(self._initial, tuple(steps))


def _value_of(c: Config):
    return outcome_of(c)


def explore(s: Stmt, aspects: AspectConfig | None = None, max_states: int = DEFAULT_MAX_STATES,
            max_depth: int = DEFAULT_MAX_DEPTH, observer: Callable[[Config, StepResult], None] | None = None,
            ) -> ExplorationResult:
    """Breadth-first closure of ``step`` from the initial configuration.

    ``observer`` (if given) sees every transition; it is used by the
    property suites to instrument reads and Γ hygiene.
    """
    init = canonical_config(initial_config(s, aspects))
    res = ExplorationResult(_initial=init)
    ids: dict = {init.key(): 0}
    res._parents.append((0, None))
    depth = [0]
    queue = deque([(0, init)])
    while queue:
        nid, c = queue.popleft()
        if isinstance(c.stmt, Stuck):
            continue
        succ = step(c)
        if not succ:
            if is_terminal(c):
                v = _value_of(c)
                if v not in res.outcome_witness:
                    res.outcome_witness[v] = nid
                res.outcomes.add(v)
            else:
                res.deadlocks.append(nid)
            continue
        if depth[nid] >= max_depth:
            res.truncated = True
            continue
        for r in succ:
            if observer is not None:
                observer(c, r)
            nc = canonical_config(r.config)
            key = nc.key()
            if key in ids:
                continue
            if len(ids) >= max_states:
                res.truncated = True
                continue
            new = len(res._parents)
            ids[key] = new
            res._parents.append((nid, TraceStep(r.rule, r.path, r.note)))
            depth.append(depth[nid] + 1)
            if isinstance(nc.stmt, Stuck):
                res.stuck_reports.add((r.rule, new))
                res._configs[new] = nc
            else:
                queue.append((new, nc))
    res.state_count = len(ids)
    return res


def witness_trace(s: Stmt, aspects: AspectConfig | None, predicate: Callable[[Config], bool],
                  max_states: int = DEFAULT_MAX_STATES, max_depth: int = DEFAULT_MAX_DEPTH) -> Trace | None:
    """A shortest trace to a terminal configuration satisfying ``predicate``."""
    init = canonical_config(initial_config(s, aspects))
    parents: dict = {init.key(): None}
    queue = deque([(init, 0)])
    while queue:
        c, d = queue.popleft()
        if isinstance(c.stmt, Stuck) or (is_terminal(c) and not step(c)):
            if predicate(c):
                return _rebuild(init, parents, c)
            continue
        if d >= max_depth:
            continue
        for r in step(c):
            nc = canonical_config(r.config)
            key = nc.key()
            if key in parents or len(parents) >= max_states:
                continue
            parents[key] = (c, TraceStep(r.rule, r.path, r.note), nc)
            queue.append((nc, d + 1))
    return None


def _rebuild(init: Config, parents: dict, c: Config) -> Trace:
    steps, configs = [], []
    key = c.key()
    while parents[key] is not None:
        prev, ts, cur = parents[key]
        steps.append(ts)
        configs.append(cur)
        key = prev.key()
    steps.reverse()
    configs.reverse()
    return Trace(init, tuple(steps), tuple(configs))


def is_stuck(c: Config) -> bool:
    return isinstance(c.stmt, Stuck)


def outcome_is(value) -> Callable[[Config], bool]:
    return lambda c: not is_stuck(c) and outcome_of(c) == value


def format_outcomes(values: Iterable) -> list[str]:
    from .lang import flatten_value, format_value

    rows = []
    for v in values:
        flat = flatten_value(v)
        rows.append((flat, "(" + ", ".join(format_value(x) for x in flat) + ")" if len(flat) > 1 else format_value(flat[0])))
    return [text for _, text in sorted(rows, key=lambda r: _sort_key(r[0]))]


def _sort_key(t: tuple):
    from .lang import format_value

    return tuple((0, x) if isinstance(x, int) else (1, format_value(x)) for x in t)
