"""The step relation.

:func:`step` enumerates every enabled rule instance of a configuration.
Each successor is tagged with the rule name, the thread path it acted on
and a short note (timestamp read, race kind, ...).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

from .front import BOTTOM, Front
from .lang import (
    REPEAT_VAR, STUCK, Bind, Cas, Delete, Expr, If, Lit, Loc, PairE, Par, Read, Repeat, Ret,
    Spw, Stmt, Stuck, Sym, Undefined, Value, Var, Write, eval_expr, format_value, has_choice,
    has_syms, mentions, resolve_choice, subst_syms, substitute,
)
from .state import (
    BARRIER, AspectConfig, BindRec, Buffer, IfRec, MachineState, ReadRec, WriteRec, append_buffer,
    blocked_by, conflicts, if_syms, initial_state, iter_entries, join_meta, spawn_meta, subst_buffer,
)

# ---------------------------------------------------------------------------
# Configurations and results
# ---------------------------------------------------------------------------


class ConfigKey:
    """Hashable identity of a configuration with the hash computed once
    (statement trees are deep, and their hashes are not cached)."""

    __slots__ = ("value", "_hash")

    def __init__(self, value: tuple):
        self.value = value
        self._hash = hash(value)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ConfigKey) and self._hash == other._hash and self.value == other.value


@dataclass(frozen=True)
class Config:
    stmt: Stmt
    state: MachineState

    def key(self) -> ConfigKey:
        k = self.__dict__.get("_key")
        if k is None:
            k = ConfigKey((self.stmt, self.state.key()))
            object.__setattr__(self, "_key", k)
        return k


@dataclass(frozen=True)
class StepResult:
    config: Config
    rule: str
    path: str
    note: str = ""


STUCK_RULES = frozenset({
    "Read-Uninit", "CAS-Uninit", "ReadNA-stuck1", "ReadNA-stuck2", "WriteNA-stuck1",
    "WriteNA-stuck2", "Retired-Access", "Invalid-Location", "Eval-Stuck",
})


def initial_config(s: Stmt, aspects: AspectConfig | None = None) -> Config:
    return Config(s, initial_state(aspects))


def is_terminal(c: Config) -> bool:
    """A stuck program, or a value with every buffer drained."""
    if isinstance(c.stmt, Stuck):
        return True
    return isinstance(c.stmt, Ret) and isinstance(c.stmt.expr, Lit) and not c.state.bufs.get("")


def outcome_of(c: Config) -> Value | None:
    if isinstance(c.stmt, Ret) and isinstance(c.stmt.expr, Lit):
        return c.stmt.expr.value
    return None


# ---------------------------------------------------------------------------
# Modifier fall-backs for disabled aspects
# ---------------------------------------------------------------------------


def _read_mod(mod: str, asp: AspectConfig) -> str:
    if mod == "sc" and not asp.sc_fronts:
        return "acq"
    if mod == "con" and not asp.consume_reads:
        return "acq"
    if mod == "na" and not asp.na_fronts:
        return "rlx"
    return mod


def _write_mod(mod: str, asp: AspectConfig) -> str:
    if mod == "sc" and not asp.sc_fronts:
        return "rel"
    if mod == "na" and not asp.na_fronts:
        return "rlx"
    return mod


def _cas_succ_mod(mod: str, asp: AspectConfig) -> str:
    if mod == "sc" and not asp.sc_fronts:
        return "relAcq"
    if mod == "con" and not asp.consume_reads:
        return "acq"
    return mod


# ---------------------------------------------------------------------------
# Memory actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Stuck:
    rule: str
    note: str


@dataclass(frozen=True)
class _ReadOk:
    value: Value
    state: MachineState
    rule: str
    note: str
    tau: int
    consumed: Front | None = None


def _gamma_blocks(gamma: frozenset, loc: str, tau: int) -> bool:
    for g in gamma:
        if g[1] == tau and g[0] == loc:
            return True
    return False


def _check_access(st: MachineState, path: str, loc: str, annot: Front | None, reading: bool):
    """Shared checks for every access: retired location, uninitialised read,
    race against the last non-atomic write.  Returns ``(stuck | None, cur)``."""
    asp = st.aspects
    if asp.deallocation and loc in st.retired:
        return _Stuck("Retired-Access", loc), None
    rd = st.rd[path]
    eff = rd.join(annot) if annot else rd
    cur = eff.get(loc)
    if reading and cur is None:
        return _Stuck("Read-Uninit", loc), None
    if asp.na_fronts:
        na = st.na.get(loc)
        if na is not None and (cur is None or cur < na):
            return _Stuck("ReadNA-stuck2" if reading else "WriteNA-stuck2", f"{loc} misses non-atomic write {na}"), None
    return None, cur


def read_outcomes(st: MachineState, path: str, loc: str, mod: str, annot: Front | None = None) -> list:
    """All ways thread ``path`` may read ``loc`` with modifier ``mod``."""
    asp = st.aspects
    mod = _read_mod(mod, asp)
    stuck, cur = _check_access(st, path, loc, annot, True)
    if stuck:
        return [stuck]
    h = st.history
    last = h.last_tau(loc)
    rd = st.rd[path]
    if mod == "na":
        if cur != last:
            return [_Stuck("ReadNA-stuck1", f"{loc} front {cur} behind {last}")]
        ent = h.get(loc, last)
        return [_ReadOk(ent.value, st.with_(rd={**st.rd, path: rd.set(loc, last)}), "ReadNA", f"{loc}@{last}", last)]
    lower = cur
    if mod == "sc":
        s = st.sc.get(loc)
        if s is not None and s > lower:
            lower = s
    out: list = []
    for tau in range(lower, last + 1):
        ent = h.get(loc, tau)
        if mod in ("acq", "sc"):
            if asp.arr_gamma and st.gamma and _gamma_blocks(st.gamma, loc, tau):
                continue
            fr = rd.join(ent.front)
            if (fr.get(loc) if fr.get(loc) is not None else -1) < tau:
                fr = fr.set(loc, tau)
            rule = "ReadSC" if mod == "sc" else "ReadAcq"
            out.append(_ReadOk(ent.value, st.with_(rd={**st.rd, path: fr}), rule, f"{loc}@{tau}", tau))
        else:
            fr = rd.set(loc, tau)
            rule = "ReadCon" if mod == "con" else "ReadRlx"
            out.append(_ReadOk(ent.value, st.with_(rd={**st.rd, path: fr}), rule, f"{loc}@{tau}", tau,
                               ent.front if mod == "con" else None))
    return out


@dataclass(frozen=True)
class _WriteOk:
    state: MachineState
    rule: str
    note: str
    tau: int


def write_outcome(st: MachineState, path: str, loc: str, mod: str, value: Value,
                  release_syms: frozenset = frozenset()):
    """Perform a write by thread ``path``; ``release_syms`` are the postponed
    operations a release write must wait for (acquire-read restrictions)."""
    asp = st.aspects
    mod = _write_mod(mod, asp)
    stuck, cur = _check_access(st, path, loc, None, False)
    if stuck:
        return stuck
    h = st.history
    last = h.last_tau(loc)
    if mod == "na" and cur != last:
        return _Stuck("WriteNA-stuck1", f"{loc} front {cur} behind {last}")
    tau = h.next_tau(loc)
    rd = st.rd[path]
    wr = st.wr[path]
    prev_rel = wr.get(loc)
    changes: dict = {}
    if mod in ("rel", "sc"):
        stored = rd.set(loc, tau)
        new_rd = stored
        if asp.write_fronts:
            changes["wr"] = {**st.wr, path: wr.set(loc, tau)}
        if mod == "sc":
            changes["sc"] = st.sc.set(loc, tau)
        rule = "WriteSC" if mod == "sc" else "WriteRel"
    elif mod == "rlx":
        base = BOTTOM
        if asp.write_fronts and prev_rel is not None:
            base = h.get(loc, prev_rel).front
        stored = base.set(loc, tau)
        new_rd = rd.set(loc, tau)
        rule = "WriteRlx"
    else:
        stored = BOTTOM
        new_rd = rd.set(loc, tau)
        changes["na"] = st.na.set(loc, tau)
        rule = "WriteNA"
    changes["history"] = h.append(loc, value, stored)
    changes["rd"] = {**st.rd, path: new_rd}
    if asp.arr_gamma and mod != "na":
        gamma = set(st.gamma)
        if asp.write_fronts and prev_rel is not None:
            gamma |= {(loc, tau, s) for (l2, t2, s) in st.gamma if l2 == loc and t2 == prev_rel}
        if mod in ("rel", "sc"):
            gamma |= {(loc, tau, s) for s in release_syms}
        changes["gamma"] = frozenset(gamma)
    return _WriteOk(st.with_(**changes), rule, f"{loc}@{tau} := {format_value(value)}", tau)


def cas_outcomes(st: MachineState, path: str, loc: str, succ: str, fail: str,
                 expected: Value, desired: Value, annot: Front | None = None) -> list:
    asp = st.aspects
    succ = _cas_succ_mod(succ, asp)
    fail = _read_mod(fail, asp)
    if asp.deallocation and loc in st.retired:
        return [_Stuck("Retired-Access", loc)]
    rd = st.rd[path]
    eff = rd.join(annot) if annot else rd
    if eff.get(loc) is None:
        return [_Stuck("CAS-Uninit", loc)]
    stuck, cur = _check_access(st, path, loc, annot, True)
    if stuck:
        return [stuck]
    h = st.history
    last = h.last_tau(loc)
    out: list = []
    # success: reads the latest entry
    ent = h.get(loc, last)
    acquiring = succ in ("acq", "relAcq", "sc")
    if ent.value == expected and not (acquiring and asp.arr_gamma and _gamma_blocks(st.gamma, loc, last)):
        if acquiring:
            fr = rd.join(ent.front).set(loc, last)
        else:
            fr = rd.set(loc, last)
        tau = last + 1
        wr = st.wr[path]
        prev_rel = wr.get(loc)
        changes: dict = {}
        if succ in ("rel", "relAcq", "sc"):
            new_rd = fr.set(loc, tau)
            stored = new_rd.join(ent.front)
            if asp.write_fronts:
                changes["wr"] = {**st.wr, path: wr.set(loc, tau)}
            if succ == "sc":
                changes["sc"] = st.sc.set(loc, tau)
        else:
            base = BOTTOM
            if asp.write_fronts and prev_rel is not None:
                base = h.get(loc, prev_rel).front
            new_rd = fr.set(loc, tau)
            stored = base.join(ent.front).set(loc, tau)
        changes["history"] = h.append(loc, desired, stored)
        changes["rd"] = {**st.rd, path: new_rd}
        if asp.arr_gamma:
            gamma = set(st.gamma)
            gamma |= {(loc, tau, s) for (l2, t2, s) in st.gamma if l2 == loc and t2 == last}
            if asp.write_fronts and prev_rel is not None:
                gamma |= {(loc, tau, s) for (l2, t2, s) in st.gamma if l2 == loc and t2 == prev_rel}
            changes["gamma"] = frozenset(gamma)
        consumed = ent.front if succ == "con" else None
        out.append(_ReadOk(ent.value, st.with_(**changes), "CAS-Succ",
                           f"{loc}@{last} -> {tau} := {format_value(desired)}", last, consumed))
    # failure: any admissible entry with a different value
    for r in read_outcomes(st, path, loc, fail, annot):
        if isinstance(r, _ReadOk) and r.value != expected:
            out.append(_ReadOk(r.value, r.state, "CAS-Fail", r.note, r.tau, r.consumed))
    return out


# ---------------------------------------------------------------------------
# Consume annotations
# ---------------------------------------------------------------------------


def _annotate(s: Stmt, syms: set[int], names: frozenset, front: Front) -> Stmt:
    if isinstance(s, Read):
        if mentions(s.loc, syms, names):
            return Read(s.mod, s.loc, (s.annot or BOTTOM).join(front))
        return s
    if isinstance(s, Cas):
        if mentions(s.loc, syms, names):
            return Cas(s.succ, s.fail, s.loc, s.expected, s.desired, (s.annot or BOTTOM).join(front))
        return s
    if isinstance(s, Bind):
        first = _annotate(s.first, syms, names, front)
        if isinstance(s.first, Ret) and mentions(s.first.expr, syms, names):
            inner = names | {s.var}
        else:
            inner = names - {s.var}
        return Bind(s.var, first, _annotate(s.rest, syms, inner, front))
    if isinstance(s, If):
        return If(s.cond, _annotate(s.then, syms, names, front), _annotate(s.else_, syms, names, front))
    if isinstance(s, (Spw, Par)):
        return type(s)(_annotate(s.left, syms, names, front), _annotate(s.right, syms, names, front))
    if isinstance(s, Repeat):
        return Repeat(_annotate(s.body, syms, names, front))
    return s


def _annotate_buffer(buf: Buffer, deps: set[int], front: Front) -> Buffer:
    out = []
    for e in buf:
        if isinstance(e, ReadRec) and mentions(e.loc, deps):
            e = ReadRec(e.sym, e.loc, e.mod, e.annot.join(front))
        elif isinstance(e, BindRec) and mentions(e.expr, deps):
            deps.add(e.sym)
        elif isinstance(e, IfRec):
            e = IfRec(e.sym, e.cond, _annotate_buffer(e.then, deps, front), _annotate_buffer(e.else_, deps, front))
        out.append(e)
    return tuple(out)


def annotate(stmt: Stmt, buf: Buffer, sym: int, front: Front) -> tuple[Stmt, Buffer]:
    """Attach ``front`` to every read whose location depends on ``sym``."""
    deps = {sym}
    buf = _annotate_buffer(buf, deps, front)
    return _annotate(stmt, deps, frozenset(), front), buf


# ---------------------------------------------------------------------------
# Buffer addressing helpers
# ---------------------------------------------------------------------------


def _walk_buffer(buf: Buffer, trail: tuple = ()) -> Iterator[tuple[tuple, int, object]]:
    for i, e in enumerate(buf):
        yield trail, i, e
        if isinstance(e, IfRec):
            yield from _walk_buffer(e.then, trail + ((e.sym, 0),))
            yield from _walk_buffer(e.else_, trail + ((e.sym, 1),))


def _splice(buf: Buffer, trail: tuple, index: int, new: tuple) -> Buffer:
    """Replace the entry at ``index`` of the subbuffer ``trail`` by ``new``."""
    if not trail:
        return buf[:index] + tuple(new) + buf[index + 1:]
    sym, branch = trail[0]
    for i, e in enumerate(buf):
        if isinstance(e, IfRec) and e.sym == sym:
            if branch == 0:
                e2 = IfRec(e.sym, e.cond, _splice(e.then, trail[1:], index, new), e.else_)
            else:
                e2 = IfRec(e.sym, e.cond, e.then, _splice(e.else_, trail[1:], index, new))
            return buf[:i] + (e2,) + buf[i + 1:]
    raise LookupError(sym)


def _subbuffer(buf: Buffer, trail: tuple) -> Buffer:
    for sym, branch in trail:
        for e in buf:
            if isinstance(e, IfRec) and e.sym == sym:
                buf = e.then if branch == 0 else e.else_
                break
        else:
            raise LookupError(sym)
    return buf


def _predecessors(buf: Buffer, trail: tuple, index: int) -> Iterator[object]:
    """Entries preceding a (possibly nested) entry in program order,
    nearest first."""
    levels = [buf]
    for sym, branch in trail:
        cur = levels[-1]
        for e in cur:
            if isinstance(e, IfRec) and e.sym == sym:
                levels.append(e.then if branch == 0 else e.else_)
                break
    idx = index
    for depth in range(len(levels) - 1, -1, -1):
        level = levels[depth]
        for j in range(idx - 1, -1, -1):
            yield level[j]
        if depth > 0:
            sym = trail[depth - 1][0]
            parent = levels[depth - 1]
            idx = next(k for k, e in enumerate(parent) if isinstance(e, IfRec) and e.sym == sym)


def _replace_spec_if(s: Stmt, sym: int, branch: int) -> Stmt:
    """Reduce the speculated ``if #sym`` to the chosen branch."""
    if isinstance(s, If):
        if isinstance(s.cond, Sym) and s.cond.id == sym:
            return s.then if branch == 0 else s.else_
        t = _replace_spec_if(s.then, sym, branch)
        f = _replace_spec_if(s.else_, sym, branch)
        return s if (t is s.then and f is s.else_) else If(s.cond, t, f)
    if isinstance(s, Bind):
        first = _replace_spec_if(s.first, sym, branch)
        return s if first is s.first else Bind(s.var, first, s.rest)
    if isinstance(s, Par):
        left = _replace_spec_if(s.left, sym, branch)
        right = _replace_spec_if(s.right, sym, branch)
        return s if (left is s.left and right is s.right) else Par(left, right)
    return s


def _drop_gamma(gamma: frozenset, syms: set[int]) -> frozenset:
    if not gamma or not syms:
        return gamma
    return frozenset(g for g in gamma if g[2] not in syms)


def _release_syms(buf: Buffer, index: int | None) -> frozenset:
    """Postponed operations a release write at top-level ``index`` (or an
    eager write when ``index`` is None) must be resolved before."""
    syms = set()
    before = buf if index is None else buf[:index]
    for e in iter_entries(before):
        if isinstance(e, (ReadRec, WriteRec)):
            syms.add(e.sym)
    if index is not None:
        for e in iter_entries(buf):
            if isinstance(e, WriteRec) and e.sym != buf[index].sym:
                syms.add(e.sym)
    return frozenset(syms)


# ---------------------------------------------------------------------------
# Step
# ---------------------------------------------------------------------------


class _Ctx:
    """Per-step bookkeeping shared by the rule helpers."""

    __slots__ = ("root", "st", "out")

    def __init__(self, root: Stmt, st: MachineState):
        self.root = root
        self.st = st
        self.out: list[StepResult] = []

    def emit(self, stmt: Stmt, st: MachineState, rule: str, path: str, note: str = "") -> None:
        self.out.append(StepResult(Config(stmt, st), rule, path, note))

    def stuck(self, rule: str, path: str, note: str = "") -> None:
        self.out.append(StepResult(Config(STUCK, self.st), rule, path, note))


def step(c: Config) -> list[StepResult]:
    """All successors of ``c``; empty iff ``c`` is terminal or blocked."""
    if isinstance(c.stmt, Stuck):
        return []
    ctx = _Ctx(c.stmt, c.state)
    _visit_thread(ctx, c.stmt, "", lambda r: r)
    return ctx.out


def _visit_thread(ctx: _Ctx, s: Stmt, path: str, plug: Callable[[Stmt], Stmt]) -> None:
    st = ctx.st
    buf = st.bufs[path]
    if buf:
        _buffer_steps(ctx, path)
    spec = if_syms(buf) if buf else frozenset()
    for redex, plug2, trail in _positions(s, plug, (), spec):
        if isinstance(redex, Par):
            _visit_thread(ctx, redex.left, path + "L", lambda r, p=plug2, n=redex: p(Par(r, n.right)))
            _visit_thread(ctx, redex.right, path + "R", lambda r, p=plug2, n=redex: p(Par(n.left, r)))
            _join(ctx, redex, plug2, path)
        else:
            _redex_steps(ctx, redex, plug2, trail, path)


def _positions(s: Stmt, plug, trail: tuple, spec) -> Iterator[tuple[Stmt, Callable, tuple]]:
    while isinstance(s, Bind) and not isinstance(s.first, Ret):
        plug = (lambda p, b: (lambda r: p(Bind(b.var, r, b.rest))))(plug, s)
        s = s.first
    if spec and isinstance(s, If) and isinstance(s.cond, Sym) and s.cond.id in spec:
        n = s
        yield from _positions(n.then, lambda r, p=plug: p(If(n.cond, r, n.else_)), trail + ((n.cond.id, 0),), spec)
        yield from _positions(n.else_, lambda r, p=plug: p(If(n.cond, n.then, r)), trail + ((n.cond.id, 1),), spec)
        return
    yield s, plug, trail


def _fresh(st: MachineState) -> tuple[int, MachineState]:
    return st.counter, st.with_(counter=st.counter + 1)


def _with_buf(st: MachineState, path: str, buf: Buffer, **kw) -> MachineState:
    return st.with_(bufs={**st.bufs, path: buf}, **kw)


def _joinable(e: Expr) -> bool:
    if isinstance(e, (Lit, Sym)):
        return True
    return isinstance(e, PairE) and _joinable(e.left) and _joinable(e.right)


def _join(ctx: _Ctx, par: Par, plug, path: str) -> None:
    left, right = par.left, par.right
    if not (isinstance(left, Ret) and isinstance(right, Ret)):
        return
    st = ctx.st
    if st.aspects.join_policy == "strict":
        if not (isinstance(left.expr, Lit) and isinstance(right.expr, Lit)):
            return
    elif not (_joinable(left.expr) and _joinable(right.expr)):
        return
    if isinstance(left.expr, Lit) and isinstance(right.expr, Lit):
        e: Expr = Lit((left.expr.value, right.expr.value))
    else:
        e = PairE(left.expr, right.expr)
    states = join_meta(path, st)
    for k, st2 in enumerate(states):
        note = f"interleaving {k}" if len(states) > 1 else ""
        ctx.emit(plug(Ret(e)), st2, "Join", path, note)


def _choice(ctx: _Ctx, path: str, plug, rebuild: Callable[[bool], Stmt]) -> None:
    ctx.emit(plug(rebuild(True)), ctx.st, "Choice-Fst", path)
    ctx.emit(plug(rebuild(False)), ctx.st, "Choice-Snd", path)


def _single(ctx: _Ctx, e: Expr, path: str):
    """Evaluate a choice- and symbol-free expression; emit stuck if undefined."""
    v = eval_expr(e)[0]
    if isinstance(v, Undefined):
        ctx.stuck("Eval-Stuck", path, v.reason)
        return None
    return v


def _redex_steps(ctx: _Ctx, s: Stmt, plug, trail: tuple, path: str) -> None:
    st = ctx.st
    asp = st.aspects
    po = asp.postponed_ops
    eager = not trail
    buf = st.bufs[path]

    if isinstance(s, Bind):  # bind x (ret e) rest
        e = s.first.expr
        if has_choice(e):
            _choice(ctx, path, plug, lambda left: Bind(s.var, Ret(resolve_choice(e, left)), s.rest))
        elif isinstance(e, (Lit, Sym)):
            ctx.emit(plug(substitute(s.rest, s.var, e)), st, "Subst", path)
        elif has_syms(e):
            if po:
                sym, st2 = _fresh(st)
                st2 = _with_buf(st2, path, append_buffer(buf, trail, BindRec(sym, e)))
                ctx.emit(plug(substitute(s.rest, s.var, Sym(sym))), st2, "Let-Postpone", path, f"#{sym}")
        else:
            v = _single(ctx, e, path)
            if v is not None:
                ctx.emit(plug(substitute(s.rest, s.var, Lit(v))), st, "Subst", path)
        return

    if isinstance(s, Ret):
        e = s.expr
        if isinstance(e, Lit):
            return
        if has_choice(e):
            _choice(ctx, path, plug, lambda left: Ret(resolve_choice(e, left)))
        elif not has_syms(e):
            v = _single(ctx, e, path)
            if v is not None:
                ctx.emit(plug(Ret(Lit(v))), st, "Eval", path)
        return

    if isinstance(s, If):
        c = s.cond
        if has_choice(c):
            _choice(ctx, path, plug, lambda left: If(resolve_choice(c, left), s.then, s.else_))
        elif not has_syms(c):
            v = _single(ctx, c, path)
            if v is None:
                return
            if type(v) is not int:
                ctx.stuck("Eval-Stuck", path, "non-integer condition")
            elif v != 0:
                ctx.emit(plug(s.then), st, "If-True", path)
            else:
                ctx.emit(plug(s.else_), st, "If-False", path)
        elif po:
            sym, st2 = _fresh(st)
            st2 = _with_buf(st2, path, append_buffer(buf, trail, IfRec(sym, c)))
            ctx.emit(plug(If(Sym(sym), s.then, s.else_)), st2, "If-Speculation-Init", path, f"#{sym}")
        return

    if isinstance(s, Repeat):
        if eager:
            body = s.body
            unrolled = Bind(REPEAT_VAR, body, If(Var(REPEAT_VAR), Ret(Var(REPEAT_VAR)), Repeat(body)))
            ctx.emit(plug(unrolled), st, "Repeat-Unroll", path)
        return

    if isinstance(s, Spw):
        if eager and not buf:
            ctx.emit(plug(Par(s.left, s.right)), spawn_meta(path, st), "Spawn", path)
        return

    if isinstance(s, Read):
        mod = _read_mod(s.mod, asp)
        if eager and isinstance(s.loc, Lit):
            if not isinstance(s.loc.value, Loc):
                ctx.stuck("Invalid-Location", path, format_value(s.loc.value))
                return
            loc = s.loc.value.name
            probe = BARRIER if mod == "sc" else ReadRec(-1, s.loc, mod)
            if not (buf and blocked_by(buf, probe)):
                for r in read_outcomes(st, path, loc, s.mod, s.annot):
                    if isinstance(r, _Stuck):
                        ctx.stuck(r.rule, path, r.note)
                    elif r.consumed is not None:
                        tmp = r.state.counter
                        stmt = plug(Ret(Sym(tmp)))
                        stmt, _ = annotate(stmt, (), tmp, r.consumed)
                        ctx.emit(subst_syms(stmt, {tmp: Lit(r.value)}), r.state, r.rule, path, r.note)
                    else:
                        ctx.emit(plug(Ret(Lit(r.value))), r.state, r.rule, path, r.note)
        if po and mod != "sc":
            sym, st2 = _fresh(st)
            rec = ReadRec(sym, s.loc, s.mod, s.annot or BOTTOM)
            st2 = _with_buf(st2, path, append_buffer(buf, trail, rec))
            ctx.emit(plug(Ret(Sym(sym))), st2, "Read-Postpone", path, f"#{sym}")
        return

    if isinstance(s, Write):
        mod = _write_mod(s.mod, asp)
        if has_choice(s.value):
            _choice(ctx, path, plug, lambda left: Write(s.mod, s.loc, resolve_choice(s.value, left)))
            return
        if eager and isinstance(s.loc, Lit) and not has_syms(s.value):
            if not isinstance(s.loc.value, Loc):
                ctx.stuck("Invalid-Location", path, format_value(s.loc.value))
                return
            v = _single(ctx, s.value, path)
            if v is None:
                return
            loc = s.loc.value.name
            probe = BARRIER if mod == "sc" else WriteRec(-1, s.loc, mod, Lit(v))
            if not (buf and blocked_by(buf, probe)):
                r = write_outcome(st, path, loc, s.mod, v, _release_syms(buf, None) if buf else frozenset())
                if isinstance(r, _Stuck):
                    ctx.stuck(r.rule, path, r.note)
                else:
                    ctx.emit(plug(Ret(Lit(v))), r.state, r.rule, path, r.note)
        if po and mod != "sc":
            sym, st2 = _fresh(st)
            st2 = _with_buf(st2, path, append_buffer(buf, trail, WriteRec(sym, s.loc, s.mod, s.value)))
            ctx.emit(plug(Ret(Sym(sym))), st2, "Write-Postpone", path, f"#{sym}")
        return

    if isinstance(s, Cas):
        for field_name in ("expected", "desired"):
            e = getattr(s, field_name)
            if has_choice(e):
                def rebuild(left, e=e, f=field_name):
                    vals = {"expected": s.expected, "desired": s.desired}
                    vals[f] = resolve_choice(e, left)
                    return Cas(s.succ, s.fail, s.loc, vals["expected"], vals["desired"], s.annot)
                _choice(ctx, path, plug, rebuild)
                return
        if not eager or buf or not isinstance(s.loc, Lit) or has_syms(s.expected) or has_syms(s.desired):
            return
        if not isinstance(s.loc.value, Loc):
            ctx.stuck("Invalid-Location", path, format_value(s.loc.value))
            return
        v1 = _single(ctx, s.expected, path)
        v2 = _single(ctx, s.desired, path) if v1 is not None else None
        if v1 is None or v2 is None:
            return
        for r in cas_outcomes(st, path, s.loc.value.name, s.succ, s.fail, v1, v2, s.annot):
            if isinstance(r, _Stuck):
                ctx.stuck(r.rule, path, r.note)
            elif r.consumed is not None:
                tmp = r.state.counter
                stmt, _ = annotate(plug(Ret(Sym(tmp))), (), tmp, r.consumed)
                ctx.emit(subst_syms(stmt, {tmp: Lit(r.value)}), r.state, r.rule, path, r.note)
            else:
                ctx.emit(plug(Ret(Lit(r.value))), r.state, r.rule, path, r.note)
        return

    if isinstance(s, Delete):
        if not eager or buf or not isinstance(s.loc, Lit):
            return
        if not isinstance(s.loc.value, Loc):
            ctx.stuck("Invalid-Location", path, format_value(s.loc.value))
            return
        loc = s.loc.value.name
        if not asp.deallocation:
            ctx.emit(plug(Ret(Lit(0))), st, "Delete", path, f"{loc} (ignored)")
        elif loc in st.retired:
            ctx.stuck("Retired-Access", path, f"double delete of {loc}")
        else:
            ctx.emit(plug(Ret(Lit(0))), st.with_(retired=st.retired | {loc}), "Delete", path, loc)
        return

    raise TypeError(f"unexpected redex {s!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# Buffer-driven rules
# ---------------------------------------------------------------------------


def _buffer_steps(ctx: _Ctx, path: str) -> None:
    st = ctx.st
    buf = st.bufs[path]
    for i, e in enumerate(buf):
        if isinstance(e, (ReadRec, WriteRec)) and isinstance(e.loc, Lit):
            if any(conflicts(a, e) for a in buf[:i]):
                continue
            if isinstance(e, ReadRec):
                _read_resolve(ctx, path, i, e)
            elif not has_syms(e.value):
                _write_resolve(ctx, path, i, e)
    for trail, i, e in _walk_buffer(buf):
        if isinstance(e, BindRec) and not has_syms(e.expr):
            _bind_resolve(ctx, path, trail, i, e)
        elif isinstance(e, IfRec):
            if not has_syms(e.cond):
                _if_resolve(ctx, path, trail, i, e)
            if st.aspects.promotion:
                _promote(ctx, path, trail, i, e)
        elif isinstance(e, ReadRec) and isinstance(e.loc, Lit):
            _forward(ctx, path, trail, i, e)


def _finish(ctx: _Ctx, st: MachineState, path: str, buf: Buffer, mapping: dict[int, Expr],
            rule: str, note: str, stmt: Stmt | None = None) -> None:
    stmt = subst_syms(stmt if stmt is not None else ctx.root, mapping)
    buf = subst_buffer(buf, mapping)
    ctx.emit(stmt, _with_buf(st, path, buf), rule, path, note)


def _read_resolve(ctx: _Ctx, path: str, i: int, e: ReadRec) -> None:
    st = ctx.st
    if not isinstance(e.loc.value, Loc):
        ctx.stuck("Invalid-Location", path, format_value(e.loc.value))
        return
    loc = e.loc.value.name
    buf = st.bufs[path]
    rest = buf[:i] + buf[i + 1:]
    for r in read_outcomes(st, path, loc, e.mod, e.annot):
        if isinstance(r, _Stuck):
            ctx.stuck(r.rule, path, r.note)
            continue
        st2 = r.state.with_(gamma=_drop_gamma(r.state.gamma, {e.sym}))
        stmt = ctx.root
        b = rest
        if r.consumed is not None:
            stmt, b = annotate(stmt, b, e.sym, r.consumed)
        _finish(ctx, st2, path, b, {e.sym: Lit(r.value)}, "Read-Resolve",
                f"#{e.sym} {r.rule} {r.note}", stmt)


def _write_resolve(ctx: _Ctx, path: str, i: int, e: WriteRec) -> None:
    st = ctx.st
    if not isinstance(e.loc.value, Loc):
        ctx.stuck("Invalid-Location", path, format_value(e.loc.value))
        return
    loc = e.loc.value.name
    buf = st.bufs[path]
    for v in eval_expr(e.value):
        if isinstance(v, Undefined):
            ctx.stuck("Eval-Stuck", path, v.reason)
            continue
        tau = st.history.next_tau(loc)
        st0 = st
        if st.gamma:
            linked = [g for g in st.gamma if g[2] == e.sym]
            if linked:
                h = st.history
                for l2, t2, _ in linked:
                    ent = h.get(l2, t2)
                    h = h.with_front(l2, t2, ent.front.join(Front({loc: tau})))
                st0 = st.with_(history=h, gamma=_drop_gamma(st.gamma, {e.sym}))
        r = write_outcome(st0, path, loc, e.mod, v, _release_syms(buf, i))
        if isinstance(r, _Stuck):
            ctx.stuck(r.rule, path, r.note)
            continue
        _finish(ctx, r.state, path, buf[:i] + buf[i + 1:], {e.sym: Lit(v)}, "Write-Resolve",
                f"#{e.sym} {r.rule} {r.note}")


def _bind_resolve(ctx: _Ctx, path: str, trail: tuple, i: int, e: BindRec) -> None:
    buf = ctx.st.bufs[path]
    for v in eval_expr(e.expr):
        if isinstance(v, Undefined):
            ctx.stuck("Eval-Stuck", path, v.reason)
            continue
        _finish(ctx, ctx.st, path, _splice(buf, trail, i, ()), {e.sym: Lit(v)}, "Bind-Resolve",
                f"#{e.sym} = {format_value(v)}")


def _if_resolve(ctx: _Ctx, path: str, trail: tuple, i: int, e: IfRec) -> None:
    st = ctx.st
    buf = st.bufs[path]
    for v in eval_expr(e.cond):
        if isinstance(v, Undefined):
            ctx.stuck("Eval-Stuck", path, v.reason)
            continue
        if type(v) is not int:
            ctx.stuck("Eval-Stuck", path, "non-integer condition")
            continue
        branch = 0 if v != 0 else 1
        kept = e.then if branch == 0 else e.else_
        dropped = e.else_ if branch == 0 else e.then
        gone = {x.sym for x in iter_entries(dropped)}
        st2 = st.with_(gamma=_drop_gamma(st.gamma, gone)) if gone else st
        stmt = _replace_spec_if(ctx.root, e.sym, branch)
        rule = "If-Resolve-True" if branch == 0 else "If-Resolve-False"
        ctx.emit(stmt, _with_buf(st2, path, _splice(buf, trail, i, kept)), rule, path, f"#{e.sym}")


def _resolved_write(sub: Buffer, j: int) -> bool:
    w = sub[j]
    return (isinstance(w, WriteRec) and isinstance(w.loc, Lit) and isinstance(w.value, Lit)
            and not any(conflicts(a, w) for a in sub[:j]))


def _promote(ctx: _Ctx, path: str, trail: tuple, i: int, e: IfRec) -> None:
    st = ctx.st
    buf = st.bufs[path]
    for j, w in enumerate(e.then):
        if not _resolved_write(e.then, j):
            continue
        for k, w2 in enumerate(e.else_):
            if not (isinstance(w2, WriteRec) and w2.loc == w.loc and w2.mod == w.mod and w2.value == w.value):
                continue
            if not _resolved_write(e.else_, k):
                continue
            new_if = IfRec(e.sym, e.cond, e.then[:j] + e.then[j + 1:], e.else_[:k] + e.else_[k + 1:])
            hoisted = WriteRec(w.sym, w.loc, w.mod, w.value)
            b = _splice(buf, trail, i, (hoisted, new_if))
            gamma = st.gamma
            if gamma:
                gamma = frozenset((l, t, w.sym if s == w2.sym else s) for (l, t, s) in gamma)
            _finish(ctx, st.with_(gamma=gamma), path, b, {w2.sym: Sym(w.sym)}, "Write-Promote",
                    f"#{w2.sym} -> #{w.sym}")


def _forward(ctx: _Ctx, path: str, trail: tuple, i: int, e: ReadRec) -> None:
    buf = ctx.st.bufs[path]
    for p in _predecessors(buf, trail, i):
        if isinstance(p, WriteRec) and p.loc == e.loc:
            if isinstance(p.value, Lit):
                _finish(ctx, ctx.st.with_(gamma=_drop_gamma(ctx.st.gamma, {e.sym})), path,
                        _splice(buf, trail, i, ()), {e.sym: p.value}, "Read-Forward",
                        f"#{e.sym} from #{p.sym}")
            return
        if conflicts(p, e):
            return
