"""Machine state: histories, per-thread fronts, operation buffers and the
acquire-read restriction set."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Union

from .front import BOTTOM, Front
from .lang import Expr, Lit, Loc, Sym, Value, expr_syms, format_value, mentions, subst_expr

# ---------------------------------------------------------------------------
# Aspects
# ---------------------------------------------------------------------------

ASPECT_FLAGS = {
    "sc": "sc_fronts",
    "na": "na_fronts",
    "po": "postponed_ops",
    "arr": "arr_gamma",
    "cr": "consume_reads",
    "wf": "write_fronts",
    "dealloc": "deallocation",
    "promote": "promotion",
}


@dataclass(frozen=True)
class AspectConfig:
    """Switches for the optional parts of the semantics.

    Viewfronts are always on.  ``promotion`` toggles Write-Promote on its own
    so that its contribution can be measured separately from buffering.
    """

    sc_fronts: bool = True
    na_fronts: bool = True
    postponed_ops: bool = False
    arr_gamma: bool = False
    consume_reads: bool = True
    write_fronts: bool = True
    join_policy: str = "strict"
    deallocation: bool = True
    promotion: bool = True

    def __post_init__(self) -> None:
        if self.join_policy not in ("strict", "interleave"):
            raise ValueError(f"unknown join policy {self.join_policy!r}")
        if self.arr_gamma and not self.postponed_ops:
            raise ValueError("acquire-read restrictions require postponed operations")
        if self.join_policy == "interleave" and not self.postponed_ops:
            raise ValueError("the interleaving join policy requires postponed operations")

    @classmethod
    def from_flags(cls, flags: str | list[str] | tuple[str, ...], join: str = "strict") -> "AspectConfig":
        """Build a config from short flag names (``sc,na,po,arr,cr,wf``).

        Flags not listed are disabled, except ``dealloc`` and ``promote``
        which stay enabled unless ``no-dealloc``/``no-promote`` is given.
        """
        if isinstance(flags, str):
            names = [f.strip() for f in flags.split(",") if f.strip()]
        else:
            names = list(flags)
        kwargs = {name: False for name in ASPECT_FLAGS.values()}
        kwargs["deallocation"] = True
        kwargs["promotion"] = True
        for name in names:
            if name.startswith("join="):
                join = name.split("=", 1)[1]
                continue
            negate = name.startswith("no-")
            key = name[3:] if negate else name
            if key not in ASPECT_FLAGS:
                raise ValueError(f"unknown aspect {name!r}")
            kwargs[ASPECT_FLAGS[key]] = not negate
        return cls(join_policy=join, **kwargs)

    def to_flags(self) -> str:
        names = [short for short, attr in ASPECT_FLAGS.items()
                 if short not in ("dealloc", "promote") and getattr(self, attr)]
        if not self.deallocation:
            names.append("no-dealloc")
        if not self.promotion:
            names.append("no-promote")
        if self.join_policy != "strict":
            names.append(f"join={self.join_policy}")
        return ",".join(names)


ALL_ASPECTS = AspectConfig(postponed_ops=True, arr_gamma=True)

# ---------------------------------------------------------------------------
# History
# ---------------------------------------------------------------------------


class HistoryEntry(NamedTuple):
    value: Value
    front: Front


class History:
    """Per-location append-only logs; timestamps are list indices."""

    __slots__ = ("_logs",)

    def __init__(self, logs: dict[str, tuple[HistoryEntry, ...]] | None = None):
        self._logs = logs if logs is not None else {}

    def last_tau(self, loc: str) -> int | None:
        log = self._logs.get(loc)
        return len(log) - 1 if log else None

    def next_tau(self, loc: str) -> int:
        log = self._logs.get(loc)
        return len(log) if log else 0

    def get(self, loc: str, tau: int) -> HistoryEntry | None:
        log = self._logs.get(loc)
        if log is None or not (0 <= tau < len(log)):
            return None
        return log[tau]

    def entries(self, loc: str) -> tuple[HistoryEntry, ...]:
        return self._logs.get(loc, ())

    def locations(self) -> list[str]:
        return sorted(self._logs)

    def append(self, loc: str, value: Value, front: Front) -> "History":
        logs = dict(self._logs)
        logs[loc] = self._logs.get(loc, ()) + (HistoryEntry(value, front),)
        return History(logs)

    def with_front(self, loc: str, tau: int, front: Front) -> "History":
        log = list(self._logs[loc])
        log[tau] = HistoryEntry(log[tau].value, front)
        logs = dict(self._logs)
        logs[loc] = tuple(log)
        return History(logs)

    def key(self) -> tuple:
        return tuple((loc, self._logs[loc]) for loc in sorted(self._logs))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, History) and self._logs == other._logs

    def __hash__(self) -> int:
        return hash(self.key())


def next_tau(h: History, loc: str) -> int:
    return h.next_tau(loc)


def last_tau(h: History, loc: str) -> int | None:
    return h.last_tau(loc)


# ---------------------------------------------------------------------------
# Buffers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ReadRec:
    sym: int
    loc: Expr
    mod: str
    annot: Front = BOTTOM


@dataclass(frozen=True, slots=True)
class WriteRec:
    sym: int
    loc: Expr
    mod: str
    value: Expr


@dataclass(frozen=True, slots=True)
class BindRec:
    sym: int
    expr: Expr


@dataclass(frozen=True, slots=True)
class IfRec:
    sym: int
    cond: Expr
    then: tuple = ()
    else_: tuple = ()


BufferEntry = Union[ReadRec, WriteRec, BindRec, IfRec]
Buffer = tuple  # tuple[BufferEntry, ...]
Trail = tuple  # tuple[(if symbol, branch 0=then / 1=else), ...]


def append_buffer(buf: Buffer, trail: Trail, entry: BufferEntry) -> Buffer:
    """Append ``entry`` to the subbuffer addressed by ``trail``."""
    if not trail:
        return buf + (entry,)
    sym, branch = trail[0]
    for i, e in enumerate(buf):
        if isinstance(e, IfRec) and e.sym == sym:
            if branch == 0:
                new = replace(e, then=append_buffer(e.then, trail[1:], entry))
            else:
                new = replace(e, else_=append_buffer(e.else_, trail[1:], entry))
            return buf[:i] + (new,) + buf[i + 1:]
    raise LookupError(f"no speculation record for symbol {sym} in buffer")


def iter_entries(buf: Buffer) -> Iterator[BufferEntry]:
    """All entries, recursing into speculation subbuffers (pre-order)."""
    for e in buf:
        yield e
        if isinstance(e, IfRec):
            yield from iter_entries(e.then)
            yield from iter_entries(e.else_)


def buffer_syms(buf: Buffer) -> set[int]:
    return {e.sym for e in iter_entries(buf)}


def if_syms(buf: Buffer) -> set[int]:
    return {e.sym for e in iter_entries(buf) if isinstance(e, IfRec)}


def entry_exprs(e: BufferEntry) -> tuple[Expr, ...]:
    if isinstance(e, ReadRec):
        return (e.loc,)
    if isinstance(e, WriteRec):
        return (e.loc, e.value)
    if isinstance(e, BindRec):
        return (e.expr,)
    return (e.cond,)


def subst_entry(e: BufferEntry, mapping: dict[int, Expr], rename: dict[int, int] | None = None) -> BufferEntry:
    """Substitute symbols inside an entry; ``rename`` also renames ids."""
    sym = rename.get(e.sym, e.sym) if rename else e.sym
    if isinstance(e, ReadRec):
        return ReadRec(sym, subst_expr(e.loc, None, mapping), e.mod, e.annot)
    if isinstance(e, WriteRec):
        return WriteRec(sym, subst_expr(e.loc, None, mapping), e.mod, subst_expr(e.value, None, mapping))
    if isinstance(e, BindRec):
        return BindRec(sym, subst_expr(e.expr, None, mapping))
    return IfRec(sym, subst_expr(e.cond, None, mapping),
                 subst_buffer(e.then, mapping, rename), subst_buffer(e.else_, mapping, rename))


def subst_buffer(buf: Buffer, mapping: dict[int, Expr], rename: dict[int, int] | None = None) -> Buffer:
    if not buf or (not mapping and not rename):
        return buf
    return tuple(subst_entry(e, mapping, rename) for e in buf)


def is_access(e: object) -> bool:
    return isinstance(e, (ReadRec, WriteRec))


ACQUIRING = frozenset({"acq", "sc", "relAcq"})


@dataclass(frozen=True, slots=True)
class Barrier:
    """Pseudo-entry for an eager operation that must not overtake anything
    (SC accesses, CAS and delete)."""


BARRIER = Barrier()


def conflicts(a: BufferEntry, b: BufferEntry | Barrier) -> bool:
    """Does later entry ``b`` conflict with earlier entry ``a``?

    Two accesses to the same location always conflict (read/read included,
    which keeps per-location coherence).  Entries after an acquiring read,
    entries that depend on an earlier symbol and accesses whose location is
    still symbolic are ordered as well.
    """
    if isinstance(b, Barrier):
        return True
    if isinstance(a, IfRec):
        if any(conflicts(x, b) for x in iter_entries(a.then + a.else_)):
            return True
        cond = expr_syms(a.cond)
        return any(mentions(x, cond) for x in entry_exprs(b))
    if any(mentions(x, {a.sym}) for x in entry_exprs(b)):
        return True
    if isinstance(a, ReadRec) and a.mod in ACQUIRING:
        return True
    if is_access(a) and is_access(b):
        if not isinstance(a.loc, Lit) or not isinstance(b.loc, Lit):
            return True
        if a.loc == b.loc:
            return True
    return False


def conflicts_before(buf: Buffer, sym: int) -> bool:
    """True iff some top-level entry before ``sym`` conflicts with it.

    Entries nested in speculation subbuffers are never directly resolvable,
    so a symbol that is not at top level yields True.
    """
    for i, e in enumerate(buf):
        if e.sym == sym:
            return any(conflicts(a, e) for a in buf[:i])
    return True


def blocked_by(buf: Buffer, entry: BufferEntry | Barrier) -> bool:
    """Would ``entry``, appended at the end of ``buf``, conflict with it?"""
    return any(conflicts(a, entry) for a in buf)


# ---------------------------------------------------------------------------
# Machine state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MachineState:
    history: History = field(default_factory=History)
    rd: dict = field(default_factory=lambda: {"": BOTTOM})
    sc: Front = BOTTOM
    na: Front = BOTTOM
    wr: dict = field(default_factory=lambda: {"": BOTTOM})
    bufs: dict = field(default_factory=lambda: {"": ()})
    gamma: frozenset = frozenset()
    retired: frozenset = frozenset()
    aspects: AspectConfig = field(default_factory=AspectConfig)
    counter: int = 0

    def with_(self, **kw) -> "MachineState":
        return replace(self, **kw)

    def key(self) -> tuple:
        """Hashable identity of the state (aspects and counter excluded)."""
        return (
            self.history.key(),
            tuple(sorted(self.rd.items())),
            self.sc,
            self.na,
            tuple(sorted(self.wr.items())),
            tuple(sorted(self.bufs.items())),
            tuple(sorted(self.gamma)),
            tuple(sorted(self.retired)),
        )


def initial_state(aspects: AspectConfig | None = None) -> MachineState:
    """Empty history and a single root thread with an empty front."""
    return MachineState(aspects=aspects or AspectConfig())


def spawn_meta(path: str, st: MachineState) -> MachineState:
    """Children inherit the parent's read front, start with empty write
    fronts and empty buffers; the parent's own entries are kept."""
    rd = dict(st.rd)
    wr = dict(st.wr)
    bufs = dict(st.bufs)
    for child in (path + "L", path + "R"):
        rd[child] = st.rd[path]
        wr[child] = BOTTOM
        bufs[child] = ()
    return st.with_(rd=rd, wr=wr, bufs=bufs)


def interleavings(a: tuple, b: tuple) -> Iterator[tuple]:
    """All merges of ``a`` and ``b`` preserving each one's internal order."""
    if not a:
        yield b
        return
    if not b:
        yield a
        return
    for rest in interleavings(a[1:], b):
        yield (a[0],) + rest
    for rest in interleavings(a, b[1:]):
        yield (b[0],) + rest


def join_meta(path: str, st: MachineState, policy: str | None = None) -> list[MachineState]:
    """Merge the children of ``path`` back into it.

    Under the strict policy the children's buffers must be empty (otherwise
    no state is returned); under the interleaving policy one state is
    returned per interleaving of the two child buffers.
    """
    policy = policy or st.aspects.join_policy
    left, right = path + "L", path + "R"
    lb, rb = st.bufs[left], st.bufs[right]
    if policy == "strict" and (lb or rb):
        return []
    rd = dict(st.rd)
    wr = dict(st.wr)
    bufs = dict(st.bufs)
    rd[path] = st.rd[left].join(st.rd[right])
    wr[path] = BOTTOM
    for child in (left, right):
        del rd[child], wr[child], bufs[child]
    out = []
    for merged in interleavings(lb, rb):
        b = dict(bufs)
        b[path] = st.bufs[path] + merged
        out.append(st.with_(rd=rd, wr=wr, bufs=b))
    return out


# ---------------------------------------------------------------------------
# Textual dump
# ---------------------------------------------------------------------------


def format_expr_for_dump(e: Expr) -> str:
    from .printer import print_expr

    return print_expr(e)


def format_entry(e: BufferEntry) -> str:
    fx = format_expr_for_dump
    if isinstance(e, ReadRec):
        ann = f" {e.annot}" if len(e.annot) else ""
        return f"read<#{e.sym}, {fx(e.loc)}, {e.mod}{ann}>"
    if isinstance(e, WriteRec):
        return f"write<#{e.sym}, {fx(e.loc)}, {e.mod}, {fx(e.value)}>"
    if isinstance(e, BindRec):
        return f"bind<#{e.sym}, {fx(e.expr)}>"
    return f"if<#{e.sym}, {fx(e.cond)}, {format_buffer(e.then)}, {format_buffer(e.else_)}>"


def format_buffer(buf: Buffer) -> str:
    return "<" + "; ".join(format_entry(e) for e in buf) + ">"


def _path_name(p: str) -> str:
    return p if p else "-"


def dump_state(st: MachineState) -> str:
    """Canonical, line-oriented rendering of a machine state."""
    lines = ["history:"]
    for loc in st.history.locations():
        for tau, ent in enumerate(st.history.entries(loc)):
            lines.append(f"  {loc} {tau} = {format_value(ent.value)} {ent.front}")
    lines.append("read fronts:")
    for p in sorted(st.rd):
        lines.append(f"  {_path_name(p)} {st.rd[p]}")
    lines.append(f"sc front: {st.sc}")
    lines.append(f"na front: {st.na}")
    lines.append("write fronts:")
    for p in sorted(st.wr):
        lines.append(f"  {_path_name(p)} {st.wr[p]}")
    lines.append("buffers:")
    for p in sorted(st.bufs):
        if st.bufs[p]:
            lines.append(f"  {_path_name(p)} {format_buffer(st.bufs[p])}")
    gamma = ", ".join(f"({loc}, {tau}, #{s})" for loc, tau, s in sorted(st.gamma))
    lines.append(f"gamma: {{{gamma}}}")
    lines.append("retired: {" + ", ".join(sorted(st.retired)) + "}")
    return "\n".join(lines)


def check_invariants(st: MachineState) -> list[str]:
    """Report violations of the structural invariants of a state."""
    problems = []
    if not (set(st.rd) == set(st.wr) == set(st.bufs)):
        problems.append("thread maps disagree on live paths")
    for p, fr in st.rd.items():
        for loc, tau in fr.items():
            last = st.history.last_tau(loc)
            if last is None or tau > last:
                problems.append(f"front of {p!r} exceeds history at {loc}")
    for name, fr in (("sc", st.sc), ("na", st.na)):
        for loc, tau in fr.items():
            if st.history.get(loc, tau) is None:
                problems.append(f"{name} front references missing entry {loc}@{tau}")
    seen: set[int] = set()
    for buf in st.bufs.values():
        for e in iter_entries(buf):
            if e.sym in seen:
                problems.append(f"symbol #{e.sym} used twice")
            seen.add(e.sym)
    for loc, tau, s in st.gamma:
        if s not in seen:
            problems.append(f"gamma mentions unknown symbol #{s}")
        if st.history.get(loc, tau) is None:
            problems.append(f"gamma references missing entry {loc}@{tau}")
    return problems


__all__ = [
    "ALL_ASPECTS", "AspectConfig", "BARRIER", "Barrier", "BindRec", "Buffer", "BufferEntry",
    "History", "HistoryEntry", "IfRec", "MachineState", "ReadRec", "WriteRec", "append_buffer",
    "blocked_by", "buffer_syms", "check_invariants", "conflicts", "conflicts_before", "dump_state",
    "if_syms", "initial_state", "interleavings", "iter_entries", "join_meta", "last_tau", "next_tau",
    "spawn_meta", "subst_buffer", "Loc", "Sym",
]
