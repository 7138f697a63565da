"""Range restriction, critical pairs, joinability search and answer uniqueness."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations, permutations

from .engine import (
    DEFAULT_BOUND,
    FALSE_STATE,
    AnyState,
    FirstMatch,
    Program,
    RandomChoice,
    Redex,
    Rule,
    State,
    StateSet,
    Status,
    derive,
    fire,
    normalize,
    state_equiv,
    successors,
)
from .terms import (
    Equation,
    Kind,
    Subst,
    Var,
    match_term,
    subst_constraint,
    subst_term,
    unify_constraints,
    var_key,
    vars_of,
)

DEFAULT_JOIN_DEPTH = 20
DEFAULT_JOIN_WIDTH = 500


# --- range restriction ------------------------------------------------------

@dataclass(frozen=True)
class RuleRangeCheck:
    rule: str
    ok: bool
    offenders: tuple = ()


@dataclass
class RangeReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.ok]

    def to_dict(self) -> dict:
        return {
            "verdict": "PASS" if self.ok else "FAIL",
            "rules": [
                {"rule": c.rule, "ok": c.ok, "offenders": [str(v) for v in c.offenders]}
                for c in self.checks
            ],
        }


def determined_vars(rule: Rule) -> set:
    """Head variables closed under the body equations (ground head => ground body)."""
    det = set(rule.head_vars)
    eqs = [c for c in rule.body if isinstance(c, Equation)]
    changed = True
    while changed:
        changed = False
        for e in eqs:
            lv, rv = set(vars_of(e.lhs)), set(vars_of(e.rhs))
            if lv <= det and not rv <= det:
                det |= rv
                changed = True
            elif rv <= det and not lv <= det:
                det |= lv
                changed = True
    return det


def range_restricted_syntactic(p: Program) -> RangeReport:
    checks = []
    for r in p.rules:
        det = determined_vars(r)
        bad = tuple(v for v in vars_of(r.body) if v not in det)
        checks.append(RuleRangeCheck(r.name, not bad, bad))
    return RangeReport(checks)


# --- critical pairs ---------------------------------------------------------

@dataclass(frozen=True)
class CriticalPair:
    source: State
    left: AnyState
    right: AnyState
    rules: tuple
    overlap: tuple  # (head index in rules[0], head index in rules[1]) pairs
    unifier: tuple
    redexes: tuple = field(default=(), compare=False, repr=False)

    @property
    def key(self) -> tuple:
        return (self.rules[0].name, self.rules[1].name, self.overlap)

    def describe(self) -> str:
        return f"{self.left}  <-  {self.source}  ->  {self.right}"


def _globalize(rule: Rule, taken: set) -> dict:
    ren = {}
    for v in rule.head_vars:
        name = v.name
        while name in taken:
            name += "'"
        taken.add(name)
        ren[v] = Var(name, Kind.GLOBAL)
    return ren


def _side(s: State, rule: Rule, theta: Subst, idx: tuple, strict: bool):
    res = fire(s, rule, theta, idx)
    if not rule.is_simp:
        if (res == s) if strict else state_equiv(res, s):
            return None
    return res


def critical_pairs(p: Program, *, strict: bool = False) -> list[CriticalPair]:
    """Critical pairs of every unordered rule pair, including self-overlaps.

    The overlap state holds both heads with the overlapped constraints
    identified by their mgu; all its variables are global.  Overlaps whose
    propagation side would be redundant produce no divergence and are
    dropped, as are duplicate mirror images of a rule's self-overlaps.
    """
    out: list[CriticalPair] = []
    rules = p.rules
    for i, r1 in enumerate(rules):
        for j in range(i, len(rules)):
            r2 = rules[j]
            taken: set = set()
            g1 = _globalize(r1, taken)
            g2 = _globalize(r2, taken)
            h1 = [subst_constraint(g1, h) for h in r1.head]
            h2 = [subst_constraint(g2, h) for h in r2.head]
            found: list[CriticalPair] = []
            for k in range(1, min(len(h1), len(h2)) + 1):
                for idx1 in combinations(range(len(h1)), k):
                    for idx2 in permutations(range(len(h2)), k):
                        if i == j and k == len(h1) and idx1 == idx2:
                            continue
                        theta: Subst | None = {}
                        for a, b in zip(idx1, idx2):
                            theta = unify_constraints(h1[a], h2[b], theta)
                            if theta is None:
                                break
                        if theta is None:
                            continue
                        cp = _build_pair(r1, r2, g1, g2, h1, h2, idx1, idx2, theta, strict)
                        if cp is not None:
                            found.append(cp)
            if i == j:
                found = _dedupe_mirrors(found)
            out.extend(found)
    return out


def _build_pair(r1, r2, g1, g2, h1, h2, idx1, idx2, theta, strict):
    users = [subst_constraint(theta, h) for h in h1]
    pos2 = {}
    for a, b in zip(idx1, idx2):
        pos2[b] = a
    for b, h in enumerate(h2):
        if b not in pos2:
            pos2[b] = len(users)
            users.append(subst_constraint(theta, h))
    source = normalize(users)
    assert isinstance(source, State) and list(source.users) == users
    th1 = {v: subst_term(theta, g) for v, g in g1.items()}
    th2 = {v: subst_term(theta, g) for v, g in g2.items()}
    ix1 = tuple(range(len(h1)))
    ix2 = tuple(pos2[b] for b in range(len(h2)))
    left = _side(source, r1, th1, ix1, strict)
    right = _side(source, r2, th2, ix2, strict)
    if left is None or right is None:
        return None
    unifier = tuple(sorted(((v, t) for v, t in theta.items()), key=lambda kv: var_key(kv[0])))
    redexes = (
        Redex(r1, tuple(th1.items()), ix1, left),
        Redex(r2, tuple(th2.items()), ix2, right),
    )
    return CriticalPair(source, left, right, (r1, r2), tuple(zip(idx1, idx2)), unifier, redexes)


def _dedupe_mirrors(pairs: list) -> list:
    kept: list = []
    for cp in pairs:
        dup = False
        for other in kept:
            if not state_equiv(cp.source, other.source):
                continue
            same = state_equiv(cp.left, other.left) and state_equiv(cp.right, other.right)
            swapped = state_equiv(cp.left, other.right) and state_equiv(cp.right, other.left)
            if same or swapped:
                dup = True
                break
        if not dup:
            kept.append(cp)
    return kept


# --- joinability ------------------------------------------------------------

class JoinVerdict(enum.Enum):
    JOINED = "joined"
    NOT_JOINABLE = "not-joinable"
    NOT_JOINED_WITHIN_BOUND = "not-joined-within-bound"
    BUDGET_EXCEEDED = "budget-exceeded"


@dataclass
class JoinReport:
    verdict: JoinVerdict
    witness: AnyState | None = None
    depths: tuple | None = None
    explored: tuple = (0, 0)
    pruned: int = 0

    @property
    def joined(self) -> bool:
        return self.verdict is JoinVerdict.JOINED

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "witness": None if self.witness is None else str(self.witness),
            "depths": list(self.depths) if self.depths else None,
            "explored": list(self.explored),
            "pruned": self.pruned,
        }


def _projection(s: State, glob: list) -> list:
    return [s.value_of(g) for g in glob]


def _instance_of(x: State, t: State, glob: list) -> bool:
    """Is the global store of ``x`` an instance of the one of ``t``?"""
    sub: Subst | None = {}
    for pt, tt in zip(_projection(t, glob), _projection(x, glob)):
        sub = match_term(pt, tt, sub)
        if sub is None:
            return False
    return True


def may_reach(t: AnyState, targets) -> bool:
    """False only if no descendant of ``t`` can be equivalent to a target.

    Built-in stores only grow along a derivation, so every descendant's
    global bindings are an instance of those of ``t``; ``False`` is an
    instance of everything.
    """
    targets = list(targets)
    if any(x.failed for x in targets):
        return True
    if t.failed:
        return False
    glob = sorted(t.globals, key=var_key)
    return any(x.globals == t.globals and _instance_of(x, t, glob) for x in targets)


class _Frontier:
    def __init__(self, s: AnyState):
        self.seen = StateSet([s])
        self.depth: dict = {id(s): 0}
        self.frontier = [s]
        self.overflow = False
        self.pruned = False

    @property
    def complete(self) -> bool:
        # seen is the full reachable set only if nothing was cut off
        return not self.frontier and not self.overflow and not self.pruned

    def lookup(self, s):
        hit = self.seen.find(s)
        return None if hit is None else (hit, self.depth[id(hit)])

    def expand(self, p: Program, level: int, width: int, strict: bool) -> list:
        new = []
        nxt = []
        for x in self.frontier:
            for y in successors(p, x, strict=strict):
                if self.seen.add(y):
                    self.depth[id(y)] = level
                    new.append(y)
                    nxt.append(y)
                    if len(self.seen) > width:
                        self.overflow = True
                        self.frontier = []
                        return new
        self.frontier = nxt
        return new


def joinable(
    p: Program,
    s1: AnyState,
    s2: AnyState,
    depth: int = DEFAULT_JOIN_DEPTH,
    width: int = DEFAULT_JOIN_WIDTH,
    *,
    strict: bool = False,
) -> JoinReport:
    """Breadth-bounded search for a common descendant of ``s1`` and ``s2``.

    Once one side is fully explored, states of the other side that cannot
    reach any of its states (see :func:`may_reach`) are not expanded.  When
    both sides run dry this way the pair is certified ``NOT_JOINABLE``.
    """
    if state_equiv(s1, s2):
        return JoinReport(JoinVerdict.JOINED, s1, (0, 0), (1, 1))
    sides = [_Frontier(s1), _Frontier(s2)]
    pruned = 0

    def explored():
        return (len(sides[0].seen), len(sides[1].seen))

    for level in range(1, depth + 1):
        for k in (0, 1):
            side, other = sides[k], sides[1 - k]
            if not side.frontier:
                continue
            for y in side.expand(p, level, width, strict):
                hit = other.lookup(y)
                if hit is not None:
                    d = (level, hit[1]) if k == 0 else (hit[1], level)
                    return JoinReport(JoinVerdict.JOINED, y, d, explored(), pruned)
        for k in (0, 1):
            if sides[k].complete and sides[1 - k].frontier:
                other = sides[1 - k]
                keep = [t for t in other.frontier if may_reach(t, sides[k].seen)]
                if len(keep) < len(other.frontier):
                    pruned += len(other.frontier) - len(keep)
                    other.pruned = True
                    other.frontier = keep
        if any(s.overflow for s in sides):
            if all(s.overflow or not s.frontier for s in sides):
                return JoinReport(JoinVerdict.BUDGET_EXCEEDED, explored=explored(), pruned=pruned)
        elif not sides[0].frontier and not sides[1].frontier:
            return JoinReport(JoinVerdict.NOT_JOINABLE, explored=explored(), pruned=pruned)
    if any(s.overflow for s in sides):
        return JoinReport(JoinVerdict.BUDGET_EXCEEDED, explored=explored(), pruned=pruned)
    return JoinReport(JoinVerdict.NOT_JOINED_WITHIN_BOUND, explored=explored(), pruned=pruned)


# --- local confluence -------------------------------------------------------

class LCVerdict(enum.Enum):
    LOCALLY_CONFLUENT = "LOCALLY_CONFLUENT"
    NOT_LOCALLY_CONFLUENT = "NOT_LOCALLY_CONFLUENT"
    UNKNOWN = "UNKNOWN"


@dataclass
class ConfluenceReport:
    verdict: LCVerdict
    results: list  # (CriticalPair, JoinReport)
    depth: int
    width: int

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "budget": {"depth": self.depth, "width": self.width},
            "critical_pairs": [
                {
                    "rules": [cp.rules[0].name, cp.rules[1].name],
                    "overlap": [list(o) for o in cp.overlap],
                    "unifier": {str(v): str(t) for v, t in cp.unifier},
                    "source": str(cp.source),
                    "left": str(cp.left),
                    "right": str(cp.right),
                    **jr.to_dict(),
                }
                for cp, jr in self.results
            ],
        }

    def to_text(self) -> str:
        lines = [f"local confluence: {self.verdict.value} ({len(self.results)} critical pairs)"]
        for cp, jr in self.results:
            lines.append(f"  {cp.rules[0].name} / {cp.rules[1].name}: {cp.describe()}")
            extra = f" at {jr.witness}" if jr.joined else f" (explored {jr.explored[0]}+{jr.explored[1]})"
            lines.append(f"    {jr.verdict.value}{extra}")
        if self.verdict is LCVerdict.UNKNOWN:
            lines.append(f"  budget exhausted: depth {self.depth}, width {self.width}")
        return "\n".join(lines)


def local_confluence_check(
    p: Program,
    depth: int = DEFAULT_JOIN_DEPTH,
    width: int = DEFAULT_JOIN_WIDTH,
    *,
    strict: bool = False,
) -> ConfluenceReport:
    results = []
    for cp in sorted(critical_pairs(p, strict=strict), key=lambda c: _rank_key(p, c)):
        results.append((cp, joinable(p, cp.left, cp.right, depth, width, strict=strict)))
    if all(jr.joined for _, jr in results):
        verdict = LCVerdict.LOCALLY_CONFLUENT
    elif any(jr.verdict is JoinVerdict.NOT_JOINABLE for _, jr in results):
        verdict = LCVerdict.NOT_LOCALLY_CONFLUENT
    else:
        verdict = LCVerdict.UNKNOWN
    return ConfluenceReport(verdict, results, depth, width)


def _rank_key(p: Program, cp: CriticalPair) -> tuple:
    names = [r.name for r in p.rules]
    return (names.index(cp.rules[0].name), names.index(cp.rules[1].name), cp.overlap)


# --- uniqueness of answers --------------------------------------------------

@dataclass
class UniquenessReport:
    passed: bool
    answers: list
    runs: int
    depth_exceeded: int
    counterexample: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "answers": [str(a) for a in self.answers],
            "runs": self.runs,
            "depth_exceeded": self.depth_exceeded,
            "counterexample": None if self.counterexample is None else [str(x) for x in self.counterexample],
        }


def uniqueness_probe(
    p: Program,
    goal: AnyState,
    trials: int = 100,
    bound: int = DEFAULT_BOUND,
    seed: int = 0,
    *,
    strict: bool = False,
) -> UniquenessReport:
    """Run first-match plus ``trials`` seeded random derivations and compare answers."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    strategies = [FirstMatch()] + [RandomChoice(seed + k) for k in range(trials)]
    answers = StateSet()
    exceeded = 0
    for strat in strategies:
        out = derive(p, goal, bound, strat, strict=strict)
        if out.status is Status.DEPTH_EXCEEDED:
            exceeded += 1
            continue
        answers.add(FALSE_STATE if out.status is Status.FALSE else out.state)
    found = list(answers)
    counter = (found[0], found[1]) if len(found) > 1 else None
    return UniquenessReport(counter is None, found, len(strategies), exceeded, counter)
