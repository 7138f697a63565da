"""Text syntax for terms, constraints and CHR rules.

Terms use Haskell type syntax (``P x (Q y) [z]``).  Constraints are user
constraints, ``True``, ``False`` or ``t1 = t2``; a constraint multiset is
comma separated.  Rules are ``Name @ H1, H2 <=> B1, B2.`` or ``==>`` for
propagation, the name being optional.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .terms import FALSE, TRUE, App, Equation, Kind, Term, User, Var

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<simp><=>)
  | (?P<prop>==>)
  | (?P<upper>[A-Z][A-Za-z0-9_']*)
  | (?P<lower>[a-z][A-Za-z0-9_']*)
  | (?P<local>_[A-Za-z0-9_']+)
  | (?P<punct>[()\[\],=@.])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    def __init__(self, message: str, text: str = "", pos: int | None = None):
        self.message = message
        self.text = text
        self.pos = pos
        where = f" at column {pos + 1}" if pos is not None else ""
        super().__init__(f"{message}{where}" + (f": {text!r}" if text else ""))


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    pos: int


def tokenize(text: str) -> list[Token]:
    out = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", text, i)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "punct":
                kind = value
            out.append(Token(kind, value, i))
        i = m.end()
    out.append(Token("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, kind: Kind):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.kind = kind

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(msg, self.text, tok.pos)

    def expect(self, kind: str) -> Token:
        if self.tok.kind != kind:
            what = self.tok.value or "end of input"
            self.error(f"expected {kind!r}, found {what!r}")
        t = self.tok
        self.i += 1
        return t

    def var(self, tok: Token) -> Var:
        if tok.kind == "local":
            return Var(tok.value[1:], Kind.LOCAL)
        return Var(tok.value, self.kind)

    def atom(self) -> Term:
        t = self.tok
        if t.kind in ("lower", "local"):
            self.i += 1
            return self.var(t)
        if t.kind == "upper":
            self.i += 1
            return App(t.value)
        if t.kind == "(":
            self.i += 1
            inner = self.term()
            self.expect(")")
            return inner
        if t.kind == "[":
            self.i += 1
            if self.tok.kind == "]":
                self.error("empty list type")
            inner = self.term()
            self.expect("]")
            return App("List", (inner,))
        if t.kind == "eof":
            self.error("unexpected end of input")
        self.error(f"unexpected {t.value!r}")

    def _starts_atom(self) -> bool:
        return self.tok.kind in ("lower", "local", "upper", "(", "[")

    def term(self) -> Term:
        start = self.tok
        head = self.atom()
        if not self._starts_atom():
            return head
        if not (start.kind == "upper" and isinstance(head, App) and not head.args):
            self.error("only a functor can be applied", start)
        args = []
        while self._starts_atom():
            args.append(self.atom())
        return App(head.functor, tuple(args))

    def constraint(self):
        start = self.tok
        lhs = self.term()
        if self.tok.kind == "=":
            self.i += 1
            return Equation(lhs, self.term())
        if isinstance(lhs, Var):
            self.error("a variable is not a constraint", start)
        if start.kind != "upper":
            self.error("a parenthesised term is not a constraint", start)
        if lhs.functor == "True" and not lhs.args:
            return TRUE
        if lhs.functor == "False" and not lhs.args:
            return FALSE
        if lhs.functor in ("True", "False"):
            self.error(f"{lhs.functor} is reserved", start)
        return User(lhs.functor, lhs.args)

    def constraints(self) -> list:
        out = [self.constraint()]
        while self.tok.kind == ",":
            self.i += 1
            out.append(self.constraint())
        return out

    def done(self):
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.value!r}")


def parse_term(text: str, kind: Kind = Kind.GLOBAL) -> Term:
    """Parse one term; variables get ``kind`` unless written ``_x`` (local)."""
    p = _Parser(text, kind)
    if p.tok.kind == "eof":
        raise ParseError("empty input", text, 0)
    t = p.term()
    p.done()
    return t


def parse_constraint(text: str, kind: Kind = Kind.GLOBAL):
    p = _Parser(text, kind)
    c = p.constraint()
    p.done()
    return c


def parse_constraints(text: str, kind: Kind = Kind.GLOBAL) -> list:
    """Parse a comma separated constraint multiset (empty text gives ``[]``)."""
    p = _Parser(text, kind)
    if p.tok.kind == "eof":
        return []
    cs = p.constraints()
    p.done()
    return cs


def parse_rule_parts(text: str) -> tuple[str | None, str, list, list]:
    """Split one rule into ``(name, '<=>' | '==>', head, body)``."""
    p = _Parser(text, Kind.PROG)
    name = None
    if p.tok.kind in ("upper", "lower") and p.toks[p.i + 1].kind == "@":
        name = p.tok.value
        p.i += 2
    head_start = p.tok
    head = p.constraints()
    for c in head:
        if not isinstance(c, User):
            p.error("rule heads may only contain user constraints", head_start)
    if p.tok.kind not in ("simp", "prop"):
        p.error("expected '<=>' or '==>'")
    arrow = p.tok.value
    p.i += 1
    body = p.constraints()
    if p.tok.kind == ".":
        p.i += 1
    p.done()
    return name, arrow, head, body
