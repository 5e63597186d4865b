"""Pretty-printer producing concrete syntax that parses back to the same AST.

Runtime-only forms are rendered with markers the parser rejects:
symbolic values as ``#n``, thread composition as ``par { .. } { .. }``,
annotated reads as ``[l]_con@{x:1}`` and the stuck marker as ``stuck``.
"""

from __future__ import annotations

from .lang import (
    NULL, SEQ_VAR, BinOp, Bind, Cas, Choice, Delete, Expr, Fst, If, Lit, Loc, PairE, Par,
    Read, Repeat, Ret, Snd, Spw, Stmt, Stuck, Sym, Var, Write, format_value,
)

_PREC = {"==": 1, "!=": 1, "<": 1, "<=": 1, ">": 1, ">=": 1,
         "+": 2, "-": 2, "*": 3, "/": 3, "%": 3}


def print_value(v) -> str:
    return format_value(v)


def print_expr(e: Expr, prec: int = 0) -> str:
    if isinstance(e, Lit):
        v = e.value
        if isinstance(v, int) and v < 0 and prec > 3:
            return f"({v})"
        return format_value(v)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Sym):
        return f"#{e.id}"
    if isinstance(e, PairE):
        return f"({print_expr(e.left)}, {print_expr(e.right)})"
    if isinstance(e, Fst):
        return _wrap(f"fst {print_expr(e.arg, 4)}", prec > 3)
    if isinstance(e, Snd):
        return _wrap(f"snd {print_expr(e.arg, 4)}", prec > 3)
    if isinstance(e, Choice):
        return _wrap(f"choice {print_expr(e.left, 4)} {print_expr(e.right, 4)}", prec > 3)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        text = f"{print_expr(e.left, p)} {e.op} {print_expr(e.right, p + 1)}"
        return _wrap(text, prec > p)
    raise TypeError(e)  # pragma: no cover


def _wrap(text: str, cond: bool) -> str:
    return f"({text})" if cond else text


def _loc(e: Expr) -> str:
    return print_expr(e)


def _annot(front) -> str:
    return f"@{front}" if front is not None and len(front) else ""


def print_stmt(s: Stmt) -> str:
    """Render a statement on a single line."""
    if isinstance(s, Ret):
        return f"ret {print_expr(s.expr)}"
    if isinstance(s, Bind):
        first = print_stmt(s.first)
        if isinstance(s.first, Bind):
            first = f"({first})"
        rest = print_stmt(s.rest)
        if s.var == SEQ_VAR:
            return f"{first}; {rest}"
        return f"{s.var} = {first}; {rest}"
    if isinstance(s, Spw):
        return f"spw {{ {print_stmt(s.left)} }} {{ {print_stmt(s.right)} }}"
    if isinstance(s, Par):
        return f"par {{ {print_stmt(s.left)} }} {{ {print_stmt(s.right)} }}"
    if isinstance(s, If):
        return f"if {print_expr(s.cond)} then {print_stmt(s.then)} else {print_stmt(s.else_)} fi"
    if isinstance(s, Repeat):
        return f"repeat {print_stmt(s.body)} end"
    if isinstance(s, Read):
        return f"[{_loc(s.loc)}]_{s.mod}{_annot(s.annot)}"
    if isinstance(s, Write):
        return f"[{_loc(s.loc)}]_{s.mod} := {print_expr(s.value)}"
    if isinstance(s, Cas):
        return (f"cas_{{{s.succ},{s.fail}}}({_loc(s.loc)}, {print_expr(s.expected)}, "
                f"{print_expr(s.desired)}){_annot(s.annot)}")
    if isinstance(s, Delete):
        return f"delete {_loc(s.loc)}"
    if isinstance(s, Stuck):
        return "stuck"
    raise TypeError(s)  # pragma: no cover


def pretty(s: Stmt, indent: str = "  ") -> str:
    """Multi-line rendering for humans; parses to the same AST."""
    return "\n".join(_lines(s, 0, indent))


def _lines(s: Stmt, depth: int, ind: str) -> list[str]:
    pad = ind * depth
    if isinstance(s, Bind):
        head = _lines(s.first, depth, ind)
        if isinstance(s.first, Bind):
            head = [pad + "("] + _lines(s.first, depth + 1, ind) + [pad + ")"]
        if s.var != SEQ_VAR:
            head[0] = pad + f"{s.var} = " + head[0][len(pad):]
        head[-1] += ";"
        return head + _lines(s.rest, depth, ind)
    if isinstance(s, (Spw, Par)):
        kw = "spw" if isinstance(s, Spw) else "par"
        return ([pad + f"{kw} {{"] + _lines(s.left, depth + 1, ind) + [pad + "} {"]
                + _lines(s.right, depth + 1, ind) + [pad + "}"])
    if isinstance(s, If):
        return ([pad + f"if {print_expr(s.cond)} then"] + _lines(s.then, depth + 1, ind)
                + [pad + "else"] + _lines(s.else_, depth + 1, ind) + [pad + "fi"])
    if isinstance(s, Repeat):
        return [pad + "repeat"] + _lines(s.body, depth + 1, ind) + [pad + "end"]
    return [pad + print_stmt(s)]


__all__ = ["print_expr", "print_stmt", "print_value", "pretty", "NULL", "Loc"]
