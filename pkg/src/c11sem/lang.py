"""Abstract syntax of the core concurrent language.

Statements and expressions are immutable (frozen dataclasses) so they can be
shared freely between states and used inside dictionary keys.

Values are plain Python objects:

* ``int`` for integers,
* :class:`Loc` for location identifiers,
* :data:`NULL` for the null pointer constant,
* a 2-tuple ``(v1, v2)`` for pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Union

from .front import Front

# ---------------------------------------------------------------------------
# Modifiers
# ---------------------------------------------------------------------------

MODIFIERS = ("sc", "relAcq", "rel", "acq", "con", "rlx", "na")
READ_MODS = frozenset({"sc", "acq", "con", "rlx", "na"})
WRITE_MODS = frozenset({"sc", "rel", "rlx", "na"})
CAS_SUCC_MODS = frozenset({"sc", "relAcq", "rel", "acq", "con", "rlx"})
CAS_FAIL_MODS = frozenset({"sc", "acq", "con", "rlx"})

# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Loc:
    """A location identifier used as a first-class value."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Null:
    """The null pointer constant; distinct from every integer."""

    def __str__(self) -> str:
        return "null"

    def __repr__(self) -> str:
        return "NULL"


NULL = Null()

Value = Union[int, Loc, Null, tuple]


def format_value(v: Value) -> str:
    if isinstance(v, tuple):
        return f"({format_value(v[0])}, {format_value(v[1])})"
    return str(v)


def flatten_value(v: Value) -> tuple:
    """Flatten right-nested pairs ``(a, (b, c))`` into ``(a, b, c)``.

    Only the second component is unfolded, so a pair stored in the first
    position stays a nested tuple.
    """
    out = []
    while isinstance(v, tuple):
        out.append(v[0])
        v = v[1]
    out.append(v)
    return tuple(out)


class Undefined:
    """Marker for an expression whose evaluation has no defined result
    (division by zero, arithmetic on non-integers, projection of a
    non-pair)."""

    __slots__ = ("reason",)

    def __init__(self, reason: str):
        self.reason = reason

    def __repr__(self) -> str:
        return f"Undefined({self.reason!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Undefined) and other.reason == self.reason

    def __hash__(self) -> int:
        return hash(("Undefined", self.reason))


class _Unresolved:
    __slots__ = ()

    def __repr__(self) -> str:
        return "UNRESOLVED"


UNRESOLVED = _Unresolved()

# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


class Expr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Sym(Expr):
    """Symbolic value standing for the result of a postponed operation."""

    id: int


@dataclass(frozen=True, slots=True)
class Lit(Expr):
    value: Value


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Choice(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class PairE(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Fst(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Snd(Expr):
    arg: Expr


BINOPS = ("+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=")


def expr_syms(e: Expr) -> set[int]:
    """Ids of all symbolic values mentioned by ``e``."""
    out: set[int] = set()
    _collect_syms(e, out)
    return out


def _collect_syms(e: Expr, out: set[int]) -> None:
    if isinstance(e, Sym):
        out.add(e.id)
    elif isinstance(e, (BinOp, Choice, PairE)):
        _collect_syms(e.left, out)
        _collect_syms(e.right, out)
    elif isinstance(e, (Fst, Snd)):
        _collect_syms(e.arg, out)


def has_syms(e: Expr) -> bool:
    if isinstance(e, Sym):
        return True
    if isinstance(e, (Lit, Var)):
        return False
    if isinstance(e, (BinOp, Choice, PairE)):
        return has_syms(e.left) or has_syms(e.right)
    return has_syms(e.arg)


def mentions(e: Expr, syms: set[int] | frozenset[int], names: set[str] | frozenset[str] = frozenset()) -> bool:
    """True when ``e`` mentions one of the symbols ``syms`` or variables ``names``."""
    if isinstance(e, Sym):
        return e.id in syms
    if isinstance(e, Var):
        return e.name in names
    if isinstance(e, Lit):
        return False
    if isinstance(e, (BinOp, Choice, PairE)):
        return mentions(e.left, syms, names) or mentions(e.right, syms, names)
    return mentions(e.arg, syms, names)


def has_choice(e: Expr) -> bool:
    if isinstance(e, Choice):
        return True
    if isinstance(e, (BinOp, PairE)):
        return has_choice(e.left) or has_choice(e.right)
    if isinstance(e, (Fst, Snd)):
        return has_choice(e.arg)
    return False


def resolve_choice(e: Expr, pick_left: bool) -> Expr:
    """Replace the leftmost-innermost ``choice`` of ``e`` by one operand."""
    new, _ = _resolve_choice(e, pick_left)
    return new


def _resolve_choice(e: Expr, pick_left: bool) -> tuple[Expr, bool]:
    if isinstance(e, Choice):
        for side in ("left", "right"):
            sub = getattr(e, side)
            if has_choice(sub):
                new, _ = _resolve_choice(sub, pick_left)
                return (Choice(new, e.right) if side == "left" else Choice(e.left, new)), True
        return (e.left if pick_left else e.right), True
    if isinstance(e, (BinOp, PairE)):
        new, done = _resolve_choice(e.left, pick_left)
        if done:
            return _rebuild2(e, new, e.right), True
        new, done = _resolve_choice(e.right, pick_left)
        if done:
            return _rebuild2(e, e.left, new), True
        return e, False
    if isinstance(e, (Fst, Snd)):
        new, done = _resolve_choice(e.arg, pick_left)
        return (type(e)(new) if done else e), done
    return e, False


def _rebuild2(e: Expr, left: Expr, right: Expr) -> Expr:
    if isinstance(e, BinOp):
        return BinOp(e.op, left, right)
    return type(e)(left, right)


def _int_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def apply_binop(op: str, a: Value, b: Value) -> Value | Undefined:
    if op == "==":
        return 1 if a == b else 0
    if op == "!=":
        return 0 if a == b else 1
    if not (type(a) is int and type(b) is int):
        return Undefined(f"operator {op} on non-integers")
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op in ("/", "%"):
        if b == 0:
            return Undefined("division by zero")
        q = _int_div(a, b)
        return q if op == "/" else a - q * b
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    raise ValueError(f"unknown operator {op}")


def eval_expr(e: Expr):
    """Evaluate ``e``.

    Returns :data:`UNRESOLVED` when ``e`` mentions a symbolic value, and
    otherwise a list of possible results (``choice`` contributes both
    operands).  An entry may be an :class:`Undefined` marker.
    """
    if has_syms(e):
        return UNRESOLVED
    out: list = []
    for v in _eval(e):
        if v not in out:
            out.append(v)
    return out


def _eval(e: Expr) -> Iterator:
    if isinstance(e, Lit):
        yield e.value
    elif isinstance(e, Var):
        raise ValueError(f"free variable {e.name} during evaluation")
    elif isinstance(e, Choice):
        yield from _eval(e.left)
        yield from _eval(e.right)
    elif isinstance(e, BinOp):
        for a in _eval(e.left):
            for b in _eval(e.right):
                if isinstance(a, Undefined):
                    yield a
                elif isinstance(b, Undefined):
                    yield b
                else:
                    yield apply_binop(e.op, a, b)
    elif isinstance(e, PairE):
        for a in _eval(e.left):
            for b in _eval(e.right):
                if isinstance(a, Undefined):
                    yield a
                elif isinstance(b, Undefined):
                    yield b
                else:
                    yield (a, b)
    elif isinstance(e, (Fst, Snd)):
        for a in _eval(e.arg):
            if isinstance(a, Undefined):
                yield a
            elif not isinstance(a, tuple):
                yield Undefined("projection of a non-pair")
            else:
                yield a[0] if isinstance(e, Fst) else a[1]
    else:  # pragma: no cover - exhaustive
        raise TypeError(e)


def eval_single(e: Expr) -> Value:
    """Evaluate a choice-free, symbol-free expression to its unique value."""
    vals = eval_expr(e)
    if vals is UNRESOLVED or len(vals) != 1 or isinstance(vals[0], Undefined):
        raise ValueError(f"expression has no unique value: {e!r}")
    return vals[0]


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


class Stmt:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Ret(Stmt):
    expr: Expr


@dataclass(frozen=True, slots=True)
class Bind(Stmt):
    var: str
    first: Stmt
    rest: Stmt


@dataclass(frozen=True, slots=True)
class Spw(Stmt):
    left: Stmt
    right: Stmt


@dataclass(frozen=True, slots=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    else_: Stmt


@dataclass(frozen=True, slots=True)
class Repeat(Stmt):
    body: Stmt


@dataclass(frozen=True, slots=True)
class Read(Stmt):
    mod: str
    loc: Expr
    annot: Front | None = None


@dataclass(frozen=True, slots=True)
class Write(Stmt):
    mod: str
    loc: Expr
    value: Expr


@dataclass(frozen=True, slots=True)
class Cas(Stmt):
    succ: str
    fail: str
    loc: Expr
    expected: Expr
    desired: Expr
    annot: Front | None = None


@dataclass(frozen=True, slots=True)
class Delete(Stmt):
    loc: Expr


@dataclass(frozen=True, slots=True)
class Par(Stmt):
    left: Stmt
    right: Stmt


@dataclass(frozen=True, slots=True)
class Stuck(Stmt):
    pass


STUCK = Stuck()

SEQ_VAR = "_"
"""Variable name used when ``s1; s2`` is desugared to a bind."""

REPEAT_VAR = "_rep"
"""Variable bound by Repeat-Unroll."""


def seq(*stmts: Stmt) -> Stmt:
    """Right-nested sequencing of statements."""
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Bind(SEQ_VAR, s, out)
    return out


def is_value_ret(s: Stmt) -> bool:
    return isinstance(s, Ret) and isinstance(s.expr, Lit)


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


def subst_expr(e: Expr, var: str | None, syms: dict[int, Expr] | None, repl: Expr | None = None) -> Expr:
    """Substitute variable ``var`` by ``repl`` and symbols via ``syms``."""
    if isinstance(e, Var):
        return repl if (var is not None and e.name == var) else e
    if isinstance(e, Sym):
        if syms is not None:
            r = syms.get(e.id)
            if r is not None:
                return r
        return e
    if isinstance(e, Lit):
        return e
    if isinstance(e, (BinOp, Choice, PairE)):
        left = subst_expr(e.left, var, syms, repl)
        right = subst_expr(e.right, var, syms, repl)
        if left is e.left and right is e.right:
            return e
        return _rebuild2(e, left, right)
    arg = subst_expr(e.arg, var, syms, repl)
    return e if arg is e.arg else type(e)(arg)


def _subst(s: Stmt, var: str | None, syms: dict[int, Expr] | None, repl: Expr | None) -> Stmt:
    def ex(e: Expr) -> Expr:
        return subst_expr(e, var, syms, repl)

    if isinstance(s, Ret):
        e = ex(s.expr)
        return s if e is s.expr else Ret(e)
    if isinstance(s, Bind):
        first = _subst(s.first, var, syms, repl)
        if var is not None and s.var == var:
            if syms:
                rest = _subst(s.rest, None, syms, None)
            else:
                rest = s.rest
        else:
            rest = _subst(s.rest, var, syms, repl)
        if first is s.first and rest is s.rest:
            return s
        return Bind(s.var, first, rest)
    if isinstance(s, (Spw, Par)):
        left = _subst(s.left, var, syms, repl)
        right = _subst(s.right, var, syms, repl)
        if left is s.left and right is s.right:
            return s
        return type(s)(left, right)
    if isinstance(s, If):
        c = ex(s.cond)
        t = _subst(s.then, var, syms, repl)
        f = _subst(s.else_, var, syms, repl)
        if c is s.cond and t is s.then and f is s.else_:
            return s
        return If(c, t, f)
    if isinstance(s, Repeat):
        b = _subst(s.body, var, syms, repl)
        return s if b is s.body else Repeat(b)
    if isinstance(s, Read):
        loc = ex(s.loc)
        return s if loc is s.loc else Read(s.mod, loc, s.annot)
    if isinstance(s, Write):
        loc, v = ex(s.loc), ex(s.value)
        if loc is s.loc and v is s.value:
            return s
        return Write(s.mod, loc, v)
    if isinstance(s, Cas):
        loc, a, b = ex(s.loc), ex(s.expected), ex(s.desired)
        if loc is s.loc and a is s.expected and b is s.desired:
            return s
        return Cas(s.succ, s.fail, loc, a, b, s.annot)
    if isinstance(s, Delete):
        loc = ex(s.loc)
        return s if loc is s.loc else Delete(loc)
    if isinstance(s, Stuck):
        return s
    raise TypeError(s)  # pragma: no cover


def substitute(s: Stmt, x: str | Sym, v: Expr | Value) -> Stmt:
    """Capture-avoiding substitution of a variable name or symbolic value.

    ``v`` may be an expression or a plain value (wrapped in :class:`Lit`).
    Binders that rebind a variable shadow it in their body; symbolic values
    are never bound so they are replaced everywhere.
    """
    repl = v if isinstance(v, Expr) else Lit(v)
    if isinstance(x, Sym):
        return _subst(s, None, {x.id: repl}, None)
    return _subst(s, x, None, repl)


def subst_syms(s: Stmt, mapping: dict[int, Expr]) -> Stmt:
    """Simultaneously replace several symbolic values."""
    if not mapping:
        return s
    return _subst(s, None, mapping, None)


def stmt_syms(s: Stmt, out: list[int] | None = None) -> list[int]:
    """Symbol ids in first-occurrence order (left-to-right traversal)."""
    if out is None:
        out = []
    for e in _stmt_exprs(s):
        ordered_syms(e, out)
    return out


def ordered_syms(e: Expr, out: list[int]) -> None:
    if isinstance(e, Sym):
        if e.id not in out:
            out.append(e.id)
    elif isinstance(e, (BinOp, Choice, PairE)):
        ordered_syms(e.left, out)
        ordered_syms(e.right, out)
    elif isinstance(e, (Fst, Snd)):
        ordered_syms(e.arg, out)


def _stmt_exprs(s: Stmt) -> Iterator[Expr]:
    if isinstance(s, Ret):
        yield s.expr
    elif isinstance(s, Bind):
        yield from _stmt_exprs(s.first)
        yield from _stmt_exprs(s.rest)
    elif isinstance(s, (Spw, Par)):
        yield from _stmt_exprs(s.left)
        yield from _stmt_exprs(s.right)
    elif isinstance(s, If):
        yield s.cond
        yield from _stmt_exprs(s.then)
        yield from _stmt_exprs(s.else_)
    elif isinstance(s, Repeat):
        yield from _stmt_exprs(s.body)
    elif isinstance(s, Read):
        yield s.loc
    elif isinstance(s, Write):
        yield s.loc
        yield s.value
    elif isinstance(s, Cas):
        yield s.loc
        yield s.expected
        yield s.desired
    elif isinstance(s, Delete):
        yield s.loc


def free_vars(s: Stmt) -> set[str]:
    """Free local variables of a statement."""
    if isinstance(s, Bind):
        return free_vars(s.first) | (free_vars(s.rest) - {s.var})
    if isinstance(s, (Spw, Par)):
        return free_vars(s.left) | free_vars(s.right)
    if isinstance(s, If):
        return _expr_vars(s.cond) | free_vars(s.then) | free_vars(s.else_)
    if isinstance(s, Repeat):
        return free_vars(s.body)
    out: set[str] = set()
    for e in _stmt_exprs(s):
        out |= _expr_vars(e)
    return out


def _expr_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (BinOp, Choice, PairE)):
        return _expr_vars(e.left) | _expr_vars(e.right)
    if isinstance(e, (Fst, Snd)):
        return _expr_vars(e.arg)
    return set()


# ---------------------------------------------------------------------------
# Evaluation contexts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class BindFrame:
    var: str
    rest: Stmt


@dataclass(frozen=True, slots=True)
class ParLeft:
    """Hole in the left branch of a par; ``other`` is the right branch."""

    other: Stmt


@dataclass(frozen=True, slots=True)
class ParRight:
    """Hole in the right branch of a par; ``other`` is the left branch."""

    other: Stmt


Frame = Union[BindFrame, ParLeft, ParRight]
Context = tuple  # tuple[Frame, ...], outermost frame first


def plug(ctx: Context, redex: Stmt) -> Stmt:
    s = redex
    for frame in reversed(ctx):
        if isinstance(frame, BindFrame):
            s = Bind(frame.var, s, frame.rest)
        elif isinstance(frame, ParLeft):
            s = Par(s, frame.other)
        else:
            s = Par(frame.other, s)
    return s


def path_of(ctx: Context) -> str:
    """Thread path of a context: the par branches traversed, ``L``/``R``."""
    return "".join("L" if isinstance(f, ParLeft) else "R" for f in ctx if not isinstance(f, BindFrame))


def decompose(s: Stmt) -> list[tuple[Context, Stmt]]:
    """All ``(E, redex)`` splits with one entry per active thread position.

    Bind nodes are descended on the left until a non-bind statement or a bind
    whose left side is a ``ret`` (the Subst redex) is reached.  A ``par``
    node whose two branches are both ``ret`` is reported as a join redex;
    otherwise its branches are decomposed recursively.  ``ret`` of a value
    and ``stuck`` have no decompositions.
    """
    out: list[tuple[Context, Stmt]] = []
    _decompose(s, (), out)
    return out


def _decompose(s: Stmt, ctx: Context, out: list) -> None:
    while isinstance(s, Bind) and not isinstance(s.first, Ret):
        ctx = ctx + (BindFrame(s.var, s.rest),)
        s = s.first
    if isinstance(s, Par):
        if isinstance(s.left, Ret) and isinstance(s.right, Ret):
            out.append((ctx, s))
            return
        _decompose(s.left, ctx + (ParLeft(s.right),), out)
        _decompose(s.right, ctx + (ParRight(s.left),), out)
        return
    if isinstance(s, Stuck) or is_value_ret(s):
        return
    out.append((ctx, s))


def thread_paths(s: Stmt) -> list[str]:
    """Paths of all live threads (including parents waiting at a par)."""
    out: list[str] = []
    _thread_paths(s, "", out)
    return out


def _thread_paths(s: Stmt, path: str, out: list[str]) -> None:
    out.append(path)
    while isinstance(s, Bind):
        s = s.first
    if isinstance(s, Par):
        _thread_paths(s.left, path + "L", out)
        _thread_paths(s.right, path + "R", out)


def map_stmt(s: Stmt, fn: Callable[[Stmt], Stmt | None]) -> Stmt:
    """Bottom-up rewriting helper: ``fn`` may return a replacement or None."""
    if isinstance(s, Bind):
        new = Bind(s.var, map_stmt(s.first, fn), map_stmt(s.rest, fn))
    elif isinstance(s, (Spw, Par)):
        new = type(s)(map_stmt(s.left, fn), map_stmt(s.right, fn))
    elif isinstance(s, If):
        new = If(s.cond, map_stmt(s.then, fn), map_stmt(s.else_, fn))
    elif isinstance(s, Repeat):
        new = Repeat(map_stmt(s.body, fn))
    else:
        new = s
    r = fn(new)
    return new if r is None else r
