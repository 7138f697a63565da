"""CHR programs, normalized states and the derivation relation.

A state is kept in solved form: the residual user constraints plus the
bindings of its global variables under the most general unifier of every
equation seen so far.  Bindings of local variables are existentially
quantified away once they have been applied.  The engine keeps no
propagation history; a propagation step is only taken when it changes the
state (modulo equivalence).
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence, Union

from .parsing import ParseError, parse_constraints, parse_rule_parts
from .terms import (
    App,
    BoolCon,
    Constraint,
    Equation,
    Kind,
    Subst,
    Term,
    User,
    Var,
    format_constraints,
    format_term,
    iter_head_matches,
    subst_constraint,
    subst_term,
    unify_pairs,
    var_key,
    vars_of,
)

DEFAULT_BOUND = 1000


class RuleKind(enum.Enum):
    SIMP = "<=>"
    PROP = "==>"


@dataclass(frozen=True)
class Rule:
    name: str
    kind: RuleKind
    head: tuple
    body: tuple

    def __post_init__(self):
        if not self.head:
            raise ValueError(f"rule {self.name}: empty head")
        for h in self.head:
            if not isinstance(h, User):
                raise ValueError(f"rule {self.name}: head constraint {h} is not a user constraint")

    @property
    def is_simp(self) -> bool:
        return self.kind is RuleKind.SIMP

    @cached_property
    def head_vars(self) -> list[Var]:
        return vars_of(self.head)

    @cached_property
    def local_vars(self) -> list[Var]:
        hv = set(self.head_vars)
        return [v for v in vars_of(self.body) if v not in hv]

    @property
    def purely_builtin(self) -> bool:
        return not any(isinstance(c, User) for c in self.body)

    def __str__(self) -> str:
        head = ", ".join(str(h) for h in self.head)
        return f"{self.name} @ {head} {self.kind.value} {format_constraints(self.body)}."


def parse_rule(text: str, default_name: str = "r") -> Rule:
    name, arrow, head, body = parse_rule_parts(text)
    kind = RuleKind.SIMP if arrow == "<=>" else RuleKind.PROP
    return Rule(name or default_name, kind, tuple(head), tuple(body))


@dataclass(frozen=True)
class Program:
    rules: tuple = ()

    def __post_init__(self):
        seen = set()
        for r in self.rules:
            if r.name in seen:
                raise ValueError(f"duplicate rule name {r.name!r}")
            seen.add(r.name)

    @classmethod
    def parse(cls, text: str) -> "Program":
        rules = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("%", 1)[0].strip()
            if not line or line.startswith("#"):
                continue
            try:
                rules.append(parse_rule(line, default_name=f"r{len(rules) + 1}"))
            except ParseError as e:
                raise ParseError(f"line {lineno}: {e.message}", e.text, e.pos) from None
        return cls(tuple(rules))

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def head_names(self) -> set[str]:
        return {h.name for r in self.rules for h in r.head}

    def __str__(self) -> str:
        return "".join(str(r) + "\n" for r in self.rules)

    def __len__(self) -> int:
        return len(self.rules)


# --- states -----------------------------------------------------------------

@dataclass(frozen=True)
class State:
    """A satisfiable normalized state.

    ``bindings`` holds ``(global, term)`` pairs sorted by variable; unbound
    globals are simply absent.  Local variables are numbered ``_1, _2, ...``
    by first occurrence.
    """

    users: tuple = ()
    bindings: tuple = ()
    globals: frozenset = frozenset()

    failed = False

    @property
    def eqs(self) -> dict:
        return dict(self.bindings)

    @cached_property
    def max_local(self) -> int:
        top = 0
        for v in vars_of(self.users) + vars_of([t for _, t in self.bindings]):
            if v.kind is Kind.LOCAL and v.name.isdigit():
                top = max(top, int(v.name))
        return top

    @cached_property
    def erased_key(self) -> tuple:
        users = tuple(sorted(_erase(str(u)) for u in self.users))
        binds = tuple((str(g), _erase(format_term(t))) for g, t in self.bindings)
        return (self.globals, binds, users)

    def value_of(self, v: Var) -> Term:
        return self.eqs.get(v, v)

    def __str__(self) -> str:
        return render_state(self)


@dataclass(frozen=True)
class FalseState:
    failed = True

    def __str__(self) -> str:
        return "False"


FALSE_STATE = FalseState()
AnyState = Union[State, FalseState]


def _erase(text: str) -> str:
    # local variable names carry no meaning under equivalence
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        out.append(ch)
        if ch == "_" and (i == 0 or not (text[i - 1].isalnum() or text[i - 1] in "_'")):
            i += 1
            while i < len(text) and (text[i].isalnum() or text[i] in "_'"):
                i += 1
            continue
        i += 1
    return "".join(out)


def render_state(s: AnyState) -> str:
    """``g = t`` for every bound global, then the residual user constraints."""
    if s.failed:
        return "False"
    parts = [f"{g} = {format_term(t)}" for g, t in s.bindings]
    parts.extend(str(u) for u in s.users)
    return ", ".join(parts) if parts else "True"


def normalize(raw: Iterable[Constraint], globals_: Iterable[Var] = ()) -> AnyState:
    """Solve the equations of ``raw`` and return the normalized state.

    Every ``GLOBAL`` variable of ``raw`` is global, plus those in ``globals_``.
    """
    users: list[User] = []
    pairs: list[tuple[Term, Term]] = []
    for c in raw:
        if isinstance(c, BoolCon):
            if not c.value:
                return FALSE_STATE
        elif isinstance(c, Equation):
            pairs.append((c.lhs, c.rhs))
        elif isinstance(c, User):
            users.append(c)
        else:
            raise TypeError(f"not a constraint: {c!r}")
    glob = set(globals_)
    for v in vars_of(users) + vars_of([t for p in pairs for t in p]):
        if v.kind is Kind.GLOBAL:
            glob.add(v)
        elif v.kind is Kind.PROG:
            raise ValueError(f"program variable {v} in a state")
    s = unify_pairs(pairs)
    if s is None:
        return FALSE_STATE
    users = [subst_constraint(s, u) for u in users]
    bindings = [(g, s[g]) for g in sorted(glob, key=var_key) if g in s and s[g] != g]
    return _canonical(users, bindings, frozenset(glob))


def _canonical(users: list, bindings: list, glob: frozenset) -> State:
    renaming: dict[Var, Var] = {}
    for v in vars_of(users) + vars_of([t for _, t in bindings]):
        if v.kind is Kind.LOCAL and v not in renaming:
            renaming[v] = Var(str(len(renaming) + 1), Kind.LOCAL)
    if any(k != v for k, v in renaming.items()):
        users = [subst_constraint(renaming, u) for u in users]
        bindings = [(g, subst_term(renaming, t)) for g, t in bindings]
    return State(tuple(users), tuple(bindings), glob)


def goal(text: str, globals_: Iterable[Var] = ()) -> AnyState:
    """Parse and normalize a goal; its variables are global."""
    return normalize(parse_constraints(text, Kind.GLOBAL), globals_)


def extend(s: AnyState, extra: Iterable[Constraint], globals_: Iterable[Var] = ()) -> AnyState:
    """``s`` multiset-union ``extra``, normalized."""
    if s.failed:
        return FALSE_STATE
    raw = list(s.users) + list(extra) + [Equation(g, t) for g, t in s.bindings]
    return normalize(raw, set(s.globals) | set(globals_))


def as_constraints(s: State) -> list[Constraint]:
    return list(s.users) + [Equation(g, t) for g, t in s.bindings]


def is_ground(s: AnyState) -> bool:
    if s.failed:
        return True
    if vars_of(s.users):
        return False
    eqs = s.eqs
    for g in s.globals:
        t = eqs.get(g)
        if t is None or vars_of(t):
            return False
    return True


# --- equivalence ------------------------------------------------------------

def _rename_match(a: Term, b: Term, fwd: dict, bwd: dict) -> bool:
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if isinstance(x, Var):
            if x.kind is not Kind.LOCAL:
                if x != y:
                    return False
                continue
            if not isinstance(y, Var) or y.kind is not Kind.LOCAL:
                return False
            if x in fwd:
                if fwd[x] != y:
                    return False
            elif y in bwd:
                return False
            else:
                fwd[x] = y
                bwd[y] = x
        elif isinstance(y, Var) or x.functor != y.functor or len(x.args) != len(y.args):
            return False
        else:
            stack.extend(zip(x.args, y.args))
    return True


def _match_users(us: list, vs: list, fwd: dict, bwd: dict) -> bool:
    if not us:
        return True
    u, rest = us[0], us[1:]
    for j, v in enumerate(vs):
        if v.name != u.name or len(v.args) != len(u.args):
            continue
        f2, b2 = dict(fwd), dict(bwd)
        if _rename_match(App(u.name, u.args), App(v.name, v.args), f2, b2):
            if _match_users(rest, vs[:j] + vs[j + 1:], f2, b2):
                return True
    return False


def state_equiv(s1: AnyState, s2: AnyState) -> bool:
    """Equality up to a bijective renaming of local variables."""
    if s1.failed or s2.failed:
        return s1.failed and s2.failed
    if s1 == s2:
        return True
    if s1.erased_key != s2.erased_key:
        return False
    fwd: dict = {}
    bwd: dict = {}
    for (g1, t1), (g2, t2) in zip(s1.bindings, s2.bindings):
        if g1 != g2 or not _rename_match(t1, t2, fwd, bwd):
            return False
    return _match_users(list(s1.users), list(s2.users), fwd, bwd)


class StateSet:
    """A set of states deduplicated modulo :func:`state_equiv`."""

    def __init__(self, states: Iterable[AnyState] = ()):
        self._buckets: dict = {}
        self._items: list = []
        for s in states:
            self.add(s)

    @staticmethod
    def _key(s: AnyState):
        return None if s.failed else s.erased_key

    def find(self, s: AnyState) -> AnyState | None:
        for t in self._buckets.get(self._key(s), ()):
            if state_equiv(s, t):
                return t
        return None

    def add(self, s: AnyState) -> bool:
        if self.find(s) is not None:
            return False
        self._buckets.setdefault(self._key(s), []).append(s)
        self._items.append(s)
        return True

    def __contains__(self, s) -> bool:
        return self.find(s) is not None

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)


# --- derivation steps -------------------------------------------------------

@dataclass(frozen=True)
class Redex:
    rule: Rule
    theta: tuple
    indexes: tuple
    result: AnyState | None = field(default=None, compare=False, repr=False)

    @property
    def subst(self) -> Subst:
        return dict(self.theta)

    def matched(self, s: State) -> list[User]:
        return [s.users[i] for i in self.indexes]


def fire(s: State, rule: Rule, theta: Subst, indexes: Sequence[int]) -> AnyState:
    """Apply ``rule`` at ``indexes`` with head matcher ``theta`` (no side conditions)."""
    ext = dict(theta)
    base = s.max_local + 1
    for k, v in enumerate(rule.local_vars):
        ext[v] = Var(str(base + k), Kind.LOCAL)
    body = [subst_constraint(ext, c) for c in rule.body]
    if rule.is_simp:
        drop = set(indexes)
        kept = [u for i, u in enumerate(s.users) if i not in drop]
    else:
        kept = list(s.users)
    raw = kept + body + [Equation(g, t) for g, t in s.bindings]
    return normalize(raw, s.globals)


def iter_redexes(p: Program, s: AnyState, *, strict: bool = False) -> Iterator[Redex]:
    """Applicable redexes in rule order, then lexicographic matched-index order.

    Propagation redexes whose result is equivalent to ``s`` are skipped;
    with ``strict`` only syntactically identical results are skipped.
    """
    if s.failed:
        return
    for rule in p.rules:
        for idx, theta in iter_head_matches(rule.head, s.users):
            if rule.is_simp:
                yield Redex(rule, tuple(theta.items()), idx)
                continue
            if rule.purely_builtin:
                if not _entailed(theta, rule.body):
                    yield Redex(rule, tuple(theta.items()), idx)
                continue
            res = fire(s, rule, theta, idx)
            redundant = (res == s) if strict else state_equiv(res, s)
            if not redundant:
                yield Redex(rule, tuple(theta.items()), idx, res)


def _frozen(t: Term) -> Term:
    if isinstance(t, Var):
        return t if t.kind is Kind.PROG else App("$" + str(t))
    return App(t.functor, tuple(_frozen(a) for a in t.args))


def _entailed(theta: Subst, body) -> bool:
    """Do the built-in ``body`` constraints hold by binding only the rule's own locals?

    With the store solved, any other solution binds a global, merges two
    variables or grows a term, none of which gives back an equivalent state.
    """
    pairs = []
    for c in body:
        if isinstance(c, BoolCon):
            if not c.value:
                return False
            continue
        pairs.append((_frozen(subst_term(theta, c.lhs)), _frozen(subst_term(theta, c.rhs))))
    return unify_pairs(pairs) is not None


def applicable(p: Program, s: AnyState, *, strict: bool = False) -> list[Redex]:
    return list(iter_redexes(p, s, strict=strict))


def step(p: Program, s: State, r: Redex) -> AnyState:
    if r.result is not None:
        return r.result
    return fire(s, r.rule, r.subst, r.indexes)


# --- strategies and bounded derivations -------------------------------------

class Strategy:
    def select(self, redexes: Iterator[Redex]) -> Redex | None:
        raise NotImplementedError


class FirstMatch(Strategy):
    def select(self, redexes):
        return next(redexes, None)

    def __repr__(self):
        return "FirstMatch()"


class RandomChoice(Strategy):
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)

    def select(self, redexes):
        options = list(redexes)
        return self.rng.choice(options) if options else None

    def __repr__(self):
        return f"RandomChoice({self.seed})"


class Scripted(Strategy):
    """Pick the ``k``-th redex at step ``k`` per the script, first match afterwards."""

    def __init__(self, choices: Sequence[int]):
        self.choices = list(choices)
        self.pos = 0

    def select(self, redexes):
        options = list(redexes)
        if not options:
            return None
        k = self.choices[self.pos] if self.pos < len(self.choices) else 0
        self.pos += 1
        return options[k]


class Status(enum.Enum):
    FINAL = "final"
    DEPTH_EXCEEDED = "depth-exceeded"
    FALSE = "false"


@dataclass(frozen=True)
class Outcome:
    status: Status
    state: AnyState
    steps: int
    trace: tuple = ()


def derive(
    p: Program,
    s: AnyState,
    bound: int = DEFAULT_BOUND,
    strategy: Strategy | None = None,
    *,
    strict: bool = False,
    record: bool = False,
) -> Outcome:
    if bound < 0:
        raise ValueError("bound must be >= 0")
    strategy = strategy or FirstMatch()
    trace = [s]
    steps = 0
    while True:
        if s.failed:
            return Outcome(Status.FALSE, s, steps, tuple(trace))
        r = strategy.select(iter_redexes(p, s, strict=strict))
        if r is None:
            return Outcome(Status.FINAL, s, steps, tuple(trace))
        if steps >= bound:
            return Outcome(Status.DEPTH_EXCEEDED, s, steps, tuple(trace))
        s = step(p, s, r)
        steps += 1
        if record:
            trace.append(s)


@dataclass
class Reachability:
    states: list
    finals: list
    truncated: bool

    def __contains__(self, s) -> bool:
        return any(state_equiv(s, t) for t in self.states)


def successors(p: Program, s: AnyState, *, strict: bool = False) -> list[AnyState]:
    return [step(p, s, r) for r in iter_redexes(p, s, strict=strict)]


def reachable(p: Program, s: AnyState, depth: int, width: int, *, strict: bool = False) -> Reachability:
    """Every state reachable within ``depth`` steps, modulo equivalence.

    ``truncated`` is set when more than ``width`` states were found or the
    depth ran out while some frontier state still had a redex.
    """
    if depth < 0 or width < 0:
        raise ValueError("depth and width must be >= 0")
    seen = StateSet([s])
    finals: list = []
    frontier = [s]
    for _ in range(depth):
        nxt = []
        for x in frontier:
            succ = successors(p, x, strict=strict)
            if not succ:
                finals.append(x)
            for y in succ:
                if seen.add(y):
                    nxt.append(y)
                    if len(seen) > width:
                        return Reachability(list(seen), finals, True)
        frontier = nxt
        if not frontier:
            return Reachability(list(seen), finals, False)
    truncated = False
    for x in frontier:
        if next(iter_redexes(p, x, strict=strict), None) is None:
            finals.append(x)
        else:
            truncated = True
    return Reachability(list(seen), finals, truncated)
