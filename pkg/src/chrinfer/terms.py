"""First-order terms in Haskell type notation, substitutions, unification and matching.

Functors start with an uppercase letter, variables with a lowercase one.
``[t]`` is shorthand for ``List t``.  Substitutions are plain dicts from
:class:`Var` to terms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Union


class Kind(enum.IntEnum):
    # ordering doubles as representative preference in unification
    GLOBAL = 0
    LOCAL = 1
    PROG = 2


@dataclass(frozen=True, slots=True)
class Var:
    name: str
    kind: Kind = Kind.GLOBAL

    def __str__(self) -> str:
        if self.kind is Kind.LOCAL:
            return "_" + self.name
        return self.name


@dataclass(frozen=True, slots=True)
class App:
    functor: str
    args: tuple = ()

    def __str__(self) -> str:
        return format_term(self)


Term = Union[Var, App]


def lst(t: Term) -> App:
    return App("List", (t,))


@dataclass(frozen=True, slots=True)
class BoolCon:
    value: bool

    def __str__(self) -> str:
        return "True" if self.value else "False"


TRUE = BoolCon(True)
FALSE = BoolCon(False)


@dataclass(frozen=True, slots=True)
class Equation:
    lhs: Term
    rhs: Term

    def __str__(self) -> str:
        return f"{format_term(self.lhs)} = {format_term(self.rhs)}"


@dataclass(frozen=True, slots=True)
class User:
    name: str
    args: tuple = ()

    def __str__(self) -> str:
        return format_term(App(self.name, self.args))


Constraint = Union[BoolCon, Equation, User]
Subst = dict


class NoUnifier(Exception):
    """Raised by :func:`mgu` when two terms have no unifier."""


# --- printing ---------------------------------------------------------------

def _is_atomic(t: Term) -> bool:
    return isinstance(t, Var) or not t.args or (t.functor == "List" and len(t.args) == 1)


def format_term(t: Term) -> str:
    if isinstance(t, Var):
        return str(t)
    if t.functor == "List" and len(t.args) == 1:
        return "[" + format_term(t.args[0]) + "]"
    if not t.args:
        return t.functor
    parts = [t.functor]
    for a in t.args:
        s = format_term(a)
        parts.append(s if _is_atomic(a) else "(" + s + ")")
    return " ".join(parts)


def format_constraints(cs: Iterable[Constraint]) -> str:
    cs = list(cs)
    return ", ".join(str(c) for c in cs) if cs else "True"


# --- variables --------------------------------------------------------------

def term_vars(t: Term, acc: dict | None = None) -> dict:
    """Variables of ``t`` in first-occurrence order (dict used as ordered set)."""
    if acc is None:
        acc = {}
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, Var):
            acc.setdefault(x, None)
        else:
            stack.extend(reversed(x.args))
    return acc


def constraint_vars(c: Constraint, acc: dict | None = None) -> dict:
    if acc is None:
        acc = {}
    if isinstance(c, Equation):
        term_vars(c.lhs, acc)
        term_vars(c.rhs, acc)
    elif isinstance(c, User):
        for a in c.args:
            term_vars(a, acc)
    return acc


def vars_of(x) -> list[Var]:
    """Ordered, duplicate-free variables of a term, constraint or iterable of either."""
    acc: dict = {}
    _collect(x, acc)
    return list(acc)


def _collect(x, acc: dict) -> None:
    if isinstance(x, (Var, App)):
        term_vars(x, acc)
    elif isinstance(x, (Equation, User, BoolCon)):
        constraint_vars(x, acc)
    else:
        for y in x:
            _collect(y, acc)


def is_ground_term(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    return all(is_ground_term(a) for a in t.args)


def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(term_size(a) for a in t.args)


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


# --- substitution -----------------------------------------------------------

def subst_term(s: Subst, t: Term) -> Term:
    if not s:
        return t
    if isinstance(t, Var):
        return s.get(t, t)
    if not t.args:
        return t
    return App(t.functor, tuple(subst_term(s, a) for a in t.args))


def subst_constraint(s: Subst, c: Constraint) -> Constraint:
    if isinstance(c, User):
        return User(c.name, tuple(subst_term(s, a) for a in c.args))
    if isinstance(c, Equation):
        return Equation(subst_term(s, c.lhs), subst_term(s, c.rhs))
    return c


def apply_subst(s: Subst, x):
    """Apply ``s`` to a term, a constraint, or a list/tuple of those."""
    if isinstance(x, (Var, App)):
        return subst_term(s, x)
    if isinstance(x, (User, Equation, BoolCon)):
        return subst_constraint(s, x)
    if isinstance(x, tuple):
        return tuple(apply_subst(s, y) for y in x)
    return [apply_subst(s, y) for y in x]


def compose(outer: Subst, inner: Subst) -> Subst:
    """``outer . inner``: apply ``inner`` first."""
    out = {v: subst_term(outer, t) for v, t in inner.items()}
    for v, t in outer.items():
        out.setdefault(v, t)
    return {v: t for v, t in out.items() if t != v}


# --- unification ------------------------------------------------------------

def var_key(v: Var) -> tuple:
    if v.name.isdigit():
        return (v.kind, 0, int(v.name), "")
    return (v.kind, 1, 0, v.name)


def _walk(t: Term, s: Subst) -> Term:
    while isinstance(t, Var):
        nxt = s.get(t)
        if nxt is None:
            return t
        t = nxt
    return t


def _occurs(v: Var, t: Term, s: Subst) -> bool:
    stack = [t]
    while stack:
        x = _walk(stack.pop(), s)
        if x == v:
            return True
        if isinstance(x, App):
            stack.extend(x.args)
    return False


def _resolve(t: Term, s: Subst) -> Term:
    t = _walk(t, s)
    if isinstance(t, Var) or not t.args:
        return t
    return App(t.functor, tuple(_resolve(a, s) for a in t.args))


def unify_pairs(pairs: Iterable[tuple[Term, Term]], s: Subst | None = None) -> Subst | None:
    """Most general unifier of all ``pairs`` extending ``s``, or ``None``.

    The result is idempotent.  When two variables are identified the one
    with the smaller :func:`var_key` stays as representative, so the solved
    form does not depend on equation order.
    """
    tri: Subst = dict(s) if s else {}
    stack = list(pairs)
    while stack:
        a, b = stack.pop()
        a = _walk(a, tri)
        b = _walk(b, tri)
        if a == b:
            continue
        if isinstance(a, Var) and isinstance(b, Var):
            if var_key(a) < var_key(b):
                tri[b] = a
            else:
                tri[a] = b
        elif isinstance(a, Var):
            if _occurs(a, b, tri):
                return None
            tri[a] = b
        elif isinstance(b, Var):
            if _occurs(b, a, tri):
                return None
            tri[b] = a
        else:
            if a.functor != b.functor or len(a.args) != len(b.args):
                return None
            stack.extend(zip(a.args, b.args))
    return {v: _resolve(v, tri) for v in tri}


def unify(t1: Term, t2: Term) -> Subst | None:
    return unify_pairs([(t1, t2)])


def mgu(t1: Term, t2: Term) -> Subst:
    s = unify(t1, t2)
    if s is None:
        raise NoUnifier(f"{format_term(t1)} and {format_term(t2)} do not unify")
    return s


def unify_constraints(c1: User, c2: User, s: Subst | None = None) -> Subst | None:
    if c1.name != c2.name or len(c1.args) != len(c2.args):
        return None
    return unify_pairs(zip(c1.args, c2.args), s)


# --- one-way matching -------------------------------------------------------

def match_term(pattern: Term, target: Term, s: Subst) -> Subst | None:
    """Extend ``s`` so that ``s(pattern) == target``; target variables are constants."""
    stack = [(pattern, target)]
    s = dict(s)
    while stack:
        p, t = stack.pop()
        if isinstance(p, Var):
            bound = s.get(p)
            if bound is None:
                s[p] = t
            elif bound != t:
                return None
        elif isinstance(t, Var) or p.functor != t.functor or len(p.args) != len(t.args):
            return None
        else:
            stack.extend(zip(p.args, t.args))
    return s


def match_constraint(pattern: User, target: User, s: Subst) -> Subst | None:
    if pattern.name != target.name or len(pattern.args) != len(target.args):
        return None
    for p, t in zip(pattern.args, target.args):
        s = match_term(p, t, s)
        if s is None:
            return None
    return s


def iter_head_matches(head: tuple, store: tuple) -> Iterator[tuple[tuple[int, ...], Subst]]:
    """All injective assignments of head constraints to store positions.

    Yields ``(indexes, theta)`` with index tuples in lexicographic order.
    """
    n = len(head)
    used = [False] * len(store)
    chosen: list[int] = []

    def go(i: int, s: Subst):
        if i == n:
            yield tuple(chosen), s
            return
        h = head[i]
        for j, c in enumerate(store):
            if used[j] or c.name != h.name:
                continue
            s2 = match_constraint(h, c, s)
            if s2 is None:
                continue
            used[j] = True
            chosen.append(j)
            yield from go(i + 1, s2)
            chosen.pop()
            used[j] = False

    yield from go(0, {})


def match(pattern, target) -> list[Subst]:
    """All substitutions mapping the ``pattern`` multiset onto ``target``.

    Enumeration order is pattern order times target index order; duplicate
    substitutions (from identical target constraints) are reported once.
    """
    pattern = tuple(pattern)
    target = tuple(target)
    if len(pattern) != len(target):
        return []
    out: list[Subst] = []
    for _, s in iter_head_matches(pattern, target):
        if s not in out:
            out.append(s)
    return out
