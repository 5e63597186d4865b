"""Recursive-descent parser for the surface syntax.

Grammar (informally)::

    program  := seq
    seq      := par
    par      := sequence ('|||' sequence)*          -- desugars to spw
    sequence := [ident '='] simple [';' [sequence]]
              | ident '=' expr [';' [sequence]]       -- value binding, sugar for ret
    simple   := 'ret' expr
              | 'spw' '{' seq '}' '{' seq '}'
              | 'if' expr 'then' seq 'else' seq 'fi'
              | 'repeat' seq 'end'
              | '[' loc ']_' mod [':=' expr]
              | 'cas_{' mod ',' mod '}' '(' loc ',' expr ',' expr ')'
              | 'delete' loc
              | '(' seq ')'
    expr     := arith [cmpop arith]*
    arith    := term (('+'|'-') term)*
    term     := unary (('*'|'/'|'%') unary)*
    unary    := 'fst' unary | 'snd' unary | 'choice' unary unary | '-' int | atom
    atom     := int | 'null' | ident | '(' expr (',' expr)* ')'

Identifiers bound by ``x = s; ...`` are local variables; all other
identifiers denote locations.  ``(a, b, c)`` abbreviates ``(a, (b, c))``.
Comments run from ``//`` to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .lang import (
    BINOPS, CAS_FAIL_MODS, CAS_SUCC_MODS, MODIFIERS, NULL, READ_MODS, SEQ_VAR, WRITE_MODS,
    BinOp, Bind, Cas, Choice, Delete, Expr, Fst, If, Lit, Loc, PairE, Read, Repeat, Ret,
    Snd, Spw, Stmt, Var, Write,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, origin: str = "<input>"):
        super().__init__(f"{origin}:{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.origin = origin


@dataclass(frozen=True)
class SourceProgram:
    text: str
    origin: str = "<input>"


@dataclass(frozen=True)
class Token:
    kind: str  # 'int', 'ident', 'sym', 'eof'
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<cas>cas_\{)
  | (?P<modsep>\]_)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>\|\|\||:=|==|!=|<=|>=|[\[\]{}(),;=+\-*/%<>])
    """,
    re.VERBOSE,
)

KEYWORDS = {"ret", "spw", "if", "then", "else", "fi", "repeat", "end", "delete",
            "null", "fst", "snd", "choice"}
RUNTIME_ONLY = {"stuck", "par"}


def tokenize(text: str, origin: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, origin)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token], origin: str):
        self.toks = tokens
        self.i = 0
        self.origin = origin
        self.scope: list[str] = []

    # -- token helpers -------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col, self.origin)

    def at(self, text: str) -> bool:
        return self.tok.kind != "eof" and self.tok.text == text and self.tok.kind in ("sym", "ident", "cas", "modsep")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            if t.kind == "ident" and t.text in RUNTIME_ONLY:
                raise self.error(f"runtime-only form {t.text!r} is not allowed in source")
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        if t.text in RUNTIME_ONLY:
            raise self.error(f"runtime-only form {t.text!r} is not allowed in source")
        self.i += 1
        return t.text

    def modifier(self, allowed: frozenset[str], what: str) -> str:
        t = self.tok
        if t.kind != "ident" or t.text not in MODIFIERS:
            raise self.error(f"expected memory-order modifier, found {t.text!r}")
        if t.text not in allowed:
            raise self.error(f"modifier {t.text!r} is not allowed for {what}")
        self.i += 1
        return t.text

    # -- statements ---------------------------------------------------------
    def program(self) -> Stmt:
        s = self.seq()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return s

    def seq(self) -> Stmt:
        parts = [self.sequence()]
        while self.accept("|||"):
            parts.append(self.sequence())
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = Spw(p, out)
        return out

    def _ends_sequence(self) -> bool:
        t = self.tok
        return t.kind == "eof" or t.text in ("}", ")", "end", "else", "fi", "|||")

    def sequence(self) -> Stmt:
        var = None
        if self.tok.kind == "ident" and self.peek().text == "=" and self.peek().kind == "sym":
            var = self.ident()
            self.expect("=")
            first = self._bound_statement()
        else:
            first = self.simple()
        if self.accept(";") and not self._ends_sequence():
            if var is not None:
                self.scope.append(var)
            try:
                rest = self.sequence()
            finally:
                if var is not None:
                    self.scope.pop()
            return Bind(var if var is not None else SEQ_VAR, first, rest)
        if var is not None:
            return Bind(var, first, Ret(Var(var)))
        return first

    def _bound_statement(self) -> Stmt:
        """Right-hand side of ``x = ...``: a statement, or an expression
        standing for ``ret expr``."""
        t = self.tok
        if t.kind == "cas" or t.text in ("ret", "spw", "if", "repeat", "delete", "["):
            return self.simple()
        if t.text == "(":
            mark = self.i
            try:
                return self.simple()
            except ParseError:
                self.i = mark
        return Ret(self.expr())

    def simple(self) -> Stmt:
        t = self.tok
        if t.kind == "ident" and t.text in RUNTIME_ONLY:
            raise self.error(f"runtime-only form {t.text!r} is not allowed in source")
        if self.accept("ret"):
            return Ret(self.expr())
        if self.accept("spw"):
            self.expect("{")
            left = self.seq()
            self.expect("}")
            self.expect("{")
            right = self.seq()
            self.expect("}")
            return Spw(left, right)
        if self.accept("if"):
            cond = self.expr()
            self.expect("then")
            then = self.seq()
            self.expect("else")
            other = self.seq()
            self.expect("fi")
            return If(cond, then, other)
        if self.accept("repeat"):
            body = self.seq()
            self.expect("end")
            return Repeat(body)
        if self.accept("delete"):
            return Delete(self.loc_expr())
        if self.tok.kind == "cas":
            self.i += 1
            succ = self.modifier(CAS_SUCC_MODS, "a successful CAS")
            self.expect(",")
            fail = self.modifier(CAS_FAIL_MODS, "a failed CAS")
            self.expect("}")
            self.expect("(")
            loc = self.loc_expr()
            self.expect(",")
            e1 = self.expr()
            self.expect(",")
            e2 = self.expr()
            self.expect(")")
            return Cas(succ, fail, loc, e1, e2)
        if self.accept("["):
            loc = self.loc_expr()
            if self.tok.kind != "modsep":
                raise self.error("expected ']_' followed by a modifier")
            self.i += 1
            mod_tok = self.tok
            if self.peek().text == ":=":
                mod = self.modifier(WRITE_MODS, "a write")
                self.expect(":=")
                return Write(mod, loc, self.expr())
            mod = self.modifier(READ_MODS | WRITE_MODS, "a read")
            if mod not in READ_MODS:
                raise self.error(f"modifier {mod!r} is not allowed for a read", mod_tok)
            return Read(mod, loc)
        if self.accept("("):
            s = self.seq()
            self.expect(")")
            return s
        raise self.error(f"expected a statement, found {t.text or 'end of input'!r}")

    def loc_expr(self) -> Expr:
        name = self.ident()
        return Var(name) if name in self.scope else Lit(Loc(name))

    # -- expressions -----------------------------------------------------------
    def expr(self) -> Expr:
        left = self.arith()
        while self.tok.kind == "sym" and self.tok.text in ("==", "!=", "<", "<=", ">", ">="):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.arith())
        return left

    def arith(self) -> Expr:
        left = self.term()
        while self.tok.kind == "sym" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "sym" and self.tok.text in ("*", "/", "%"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.accept("fst"):
            return Fst(self.unary())
        if self.accept("snd"):
            return Snd(self.unary())
        if self.accept("choice"):
            a = self.unary()
            return Choice(a, self.unary())
        if self.tok.kind == "sym" and self.tok.text == "-" and self.peek().kind == "int":
            self.i += 1
            n = int(self.tok.text)
            self.i += 1
            return Lit(-n)
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Lit(int(t.text))
        if self.accept("null"):
            return Lit(NULL)
        if t.kind == "ident" and t.text not in KEYWORDS:
            name = self.ident()
            return Var(name) if name in self.scope else Lit(Loc(name))
        if self.accept("("):
            items = [self.expr()]
            while self.accept(","):
                items.append(self.expr())
            self.expect(")")
            out = items[-1]
            for item in reversed(items[:-1]):
                out = PairE(item, out)
            return out
        raise self.error(f"expected an expression, found {t.text or 'end of input'!r}")


def parse(src: str | SourceProgram, origin: str | None = None) -> Stmt:
    """Parse concrete syntax into a source-level statement."""
    if isinstance(src, SourceProgram):
        text, org = src.text, src.origin
    else:
        text, org = src, origin or "<input>"
    return _Parser(tokenize(text, org), org).program()


def parse_expr(text: str, bound: tuple[str, ...] = ()) -> Expr:
    p = _Parser(tokenize(text), "<expr>")
    p.scope.extend(bound)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return e


__all__ = ["ParseError", "SourceProgram", "parse", "parse_expr", "tokenize", "BINOPS"]
