"""Rank-function certificates for ground termination, and CLP projection."""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, field

from .engine import Program, Rule
from .terms import BoolCon, Equation, Term, User, Var, subst_term, unify_pairs, var_key

MAX_SEARCH = 4096


class RankSpecError(ValueError):
    pass


@dataclass(frozen=True)
class RankSpec:
    """Functor weights (default 1) and the measured argument positions (1-based)."""

    weights: tuple = ()
    measures: tuple = ()
    default_weight: int = 1

    def __post_init__(self):
        for f, w in self.weights:
            if w < 0:
                raise RankSpecError(f"negative weight for {f}")
        if self.default_weight < 0:
            raise RankSpecError("negative default weight")

    @classmethod
    def make(cls, weights: dict | None = None, measures: dict | None = None) -> "RankSpec":
        weights = weights or {}
        measures = measures or {}
        return cls(
            tuple(sorted(weights.items())),
            tuple(sorted((k, tuple(sorted(v))) for k, v in measures.items())),
        )

    @classmethod
    def parse(cls, text: str) -> "RankSpec":
        """Read ``measure F 1; weight List 1`` style statements."""
        weights: dict = {}
        measures: dict = {}
        for stmt in re.split(r"[;\n]", text):
            stmt = stmt.split("#", 1)[0].strip()
            if not stmt:
                continue
            words = stmt.split()
            try:
                if words[0] == "measure" and len(words) >= 2:
                    measures.setdefault(words[1], set()).update(int(w) for w in words[2:])
                elif words[0] == "weight" and len(words) == 3:
                    weights[words[1]] = int(words[2])
                else:
                    raise RankSpecError(f"bad statement {stmt!r}")
            except ValueError as e:
                if isinstance(e, RankSpecError):
                    raise
                raise RankSpecError(f"bad number in {stmt!r}") from None
        for name, pos in measures.items():
            if any(i < 1 for i in pos):
                raise RankSpecError(f"argument positions start at 1 ({name})")
        return cls.make(weights, measures)

    def weight(self, functor: str) -> int:
        return dict(self.weights).get(functor, self.default_weight)

    def positions(self, name: str) -> tuple:
        return dict(self.measures).get(name, ())

    @property
    def min_size(self) -> int:
        # smallest rank any ground term can have
        return min([self.default_weight] + [w for _, w in self.weights])

    def __str__(self) -> str:
        parts = [f"measure {n} {' '.join(map(str, ps))}" for n, ps in self.measures]
        parts += [f"weight {f} {w}" for f, w in self.weights]
        return "; ".join(parts)


def rank_term(spec: RankSpec, t: Term) -> int:
    if isinstance(t, Var):
        raise ValueError("rank of a non-ground term")
    return spec.weight(t.functor) + sum(rank_term(spec, a) for a in t.args)


def rank_constraint(spec: RankSpec, c: User) -> int:
    return sum(rank_term(spec, c.args[i - 1]) for i in spec.positions(c.name) if i <= len(c.args))


def rank_store(spec: RankSpec, users) -> int:
    return sum(rank_constraint(spec, u) for u in users)


@dataclass(frozen=True)
class SizePolynomial:
    """``const + sum(coeff * size(v))``."""

    const: int = 0
    coeffs: tuple = ()

    @classmethod
    def of_term(cls, spec: RankSpec, t: Term) -> "SizePolynomial":
        if isinstance(t, Var):
            return cls(0, ((t, 1),))
        out = cls(spec.weight(t.functor))
        for a in t.args:
            out = out + cls.of_term(spec, a)
        return out

    def __add__(self, other: "SizePolynomial") -> "SizePolynomial":
        c = dict(self.coeffs)
        for v, k in other.coeffs:
            c[v] = c.get(v, 0) + k
        return SizePolynomial(self.const + other.const, _norm(c))

    def __sub__(self, other: "SizePolynomial") -> "SizePolynomial":
        neg = SizePolynomial(-other.const, tuple((v, -k) for v, k in other.coeffs))
        return self + neg

    def coeff(self, v: Var) -> int:
        return dict(self.coeffs).get(v, 0)

    def __str__(self) -> str:
        parts = [str(self.const)] if self.const or not self.coeffs else []
        for v, k in self.coeffs:
            term = f"size({v})" if k == 1 else f"{k}*size({v})"
            parts.append(term)
        return " + ".join(parts).replace("+ -", "- ")


def _norm(c: dict) -> tuple:
    return tuple(sorted(((v, k) for v, k in c.items() if k), key=lambda vk: var_key(vk[0])))


def store_poly(spec: RankSpec, users) -> SizePolynomial:
    out = SizePolynomial()
    for u in users:
        for i in spec.positions(u.name):
            if i <= len(u.args):
                out = out + SizePolynomial.of_term(spec, u.args[i - 1])
    return out


class RuleStatus(enum.Enum):
    CERTIFIED = "CERTIFIED"
    NOT_CERTIFIED = "NOT-CERTIFIED"
    TERMINATING_BY_LEMMA = "TERMINATING-BY-LEMMA"
    NOT_CERTIFIABLE = "NOT-CERTIFIABLE"


class TermVerdict(enum.Enum):
    GROUND_TERMINATING = "GROUND-TERMINATING"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class RuleCertificate:
    rule: str
    status: RuleStatus
    head_rank: SizePolynomial | None = None
    body_rank: SizePolynomial | None = None
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (RuleStatus.CERTIFIED, RuleStatus.TERMINATING_BY_LEMMA)


@dataclass
class TerminationReport:
    verdict: TermVerdict
    spec: RankSpec
    rules: list
    searched: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "spec": str(self.spec),
            "searched": self.searched,
            "rules": [
                {
                    "rule": c.rule,
                    "status": c.status.value,
                    "head_rank": None if c.head_rank is None else str(c.head_rank),
                    "body_rank": None if c.body_rank is None else str(c.body_rank),
                    "note": c.note,
                }
                for c in self.rules
            ],
            "notes": list(self.notes),
        }

    def to_text(self) -> str:
        how = "searched" if self.searched else "given"
        lines = [f"ground termination: {self.verdict.value} (rank spec, {how}: {str(self.spec) or 'none'})"]
        for c in self.rules:
            detail = ""
            if c.head_rank is not None:
                detail = f"  head {c.head_rank}  body {c.body_rank}"
            lines.append(f"  {c.rule}: {c.status.value}{detail}" + (f"  [{c.note}]" if c.note else ""))
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def certify_rule(rule: Rule, spec: RankSpec) -> RuleCertificate:
    if not rule.is_simp:
        if rule.purely_builtin:
            return RuleCertificate(rule.name, RuleStatus.TERMINATING_BY_LEMMA)
        return RuleCertificate(rule.name, RuleStatus.NOT_CERTIFIABLE, note="propagates user constraints")
    pairs = [(c.lhs, c.rhs) for c in rule.body if isinstance(c, Equation)]
    solved = unify_pairs(pairs)
    if solved is None or any(isinstance(c, BoolCon) and not c.value for c in rule.body):
        return RuleCertificate(rule.name, RuleStatus.CERTIFIED, note="body always fails")
    head = [User(h.name, tuple(subst_term(solved, a) for a in h.args)) for h in rule.head]
    body = [
        User(c.name, tuple(subst_term(solved, a) for a in c.args)) for c in rule.body if isinstance(c, User)
    ]
    hp, bp = store_poly(spec, head), store_poly(spec, body)
    diff = hp - bp
    margin = diff.const + sum(k for _, k in diff.coeffs) * spec.min_size
    ok = all(k >= 0 for _, k in diff.coeffs) and margin >= 1
    status = RuleStatus.CERTIFIED if ok else RuleStatus.NOT_CERTIFIED
    return RuleCertificate(rule.name, status, hp, bp)


def _report(p: Program, spec: RankSpec, searched: bool) -> TerminationReport:
    certs = [certify_rule(r, spec) for r in p.rules]
    verdict = TermVerdict.GROUND_TERMINATING if all(c.ok for c in certs) else TermVerdict.UNKNOWN
    notes = []
    multi = [r.name for r in p.rules if r.is_simp and len(r.head) > 1]
    if multi:
        notes.append("projection correspondence applies to mono-headed simplifications only: " + ", ".join(multi))
    return TerminationReport(verdict, spec, certs, searched, notes)


def candidate_specs(p: Program):
    arity: dict = {}
    for r in p.rules:
        for c in list(r.head) + [b for b in r.body if isinstance(b, User)]:
            arity[c.name] = max(arity.get(c.name, 0), len(c.args))
    names = sorted(arity)
    choices = [range(1, arity[n] + 1) if arity[n] else [None] for n in names]
    for combo in itertools.islice(itertools.product(*choices), MAX_SEARCH):
        yield RankSpec.make(measures={n: [i] for n, i in zip(names, combo) if i is not None})


def rank_certificate(p: Program, spec: RankSpec | None = None) -> TerminationReport:
    """Check that every simplification strictly lowers the rank of ground stores.

    Without ``spec`` every single-argument measure per constraint (weights 1)
    is tried and the first one certifying the whole program is reported.
    """
    if spec is not None:
        return _report(p, spec, False)
    first = None
    for cand in candidate_specs(p):
        rep = _report(p, cand, True)
        if first is None:
            first = rep
        if all(c.status is not RuleStatus.NOT_CERTIFIED for c in rep.rules):
            return rep
    return first if first is not None else _report(p, RankSpec(), True)


# --- CLP projection ---------------------------------------------------------

class ProjectionError(ValueError):
    pass


def _mangle(name: str, seen: dict) -> str:
    low = name.lower()
    prev = seen.setdefault(low, name)
    if prev != name:
        raise ProjectionError(f"functors {prev} and {name} both map to {low}")
    return low


def _canon_var(i: int) -> str:
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return letters[i % 26] + (str(i // 26) if i >= 26 else "")


def clp_projection(p: Program) -> str:
    """One Horn clause ``h :- B.`` per head constraint of every simplification."""
    seen: dict = {}
    out = ["% CLP projection of the simplification rules"]
    props = [r.name for r in p.rules if not r.is_simp]
    if props:
        out.append("% omitted propagation rules: " + ", ".join(props))
    for r in p.rules:
        if not r.is_simp:
            continue
        names: dict = {}

        def term(t: Term) -> str:
            if isinstance(t, Var):
                if t not in names:
                    names[t] = _canon_var(len(names))
                return names[t]
            f = _mangle(t.functor, seen)
            if not t.args:
                return f
            return f + "(" + ", ".join(term(a) for a in t.args) + ")"

        for h in r.head:
            names.clear()
            head = _atom(h, term, seen)
            body = []
            for c in r.body:
                if isinstance(c, BoolCon):
                    if not c.value:
                        body.append("fail")
                elif isinstance(c, Equation):
                    body.append(f"{term(c.lhs)} = {term(c.rhs)}")
                else:
                    body.append(_atom(c, term, seen))
            out.append(f"{head} :- {', '.join(body)}." if body else f"{head}.")
    return "\n".join(out) + "\n"


def _atom(c: User, term, seen: dict) -> str:
    name = _mangle(c.name, seen)
    if not c.args:
        return name
    return name + "(" + ", ".join(term(a) for a in c.args) + ")"


def count_clauses(text: str) -> int:
    return sum(1 for line in text.splitlines() if line and not line.startswith("%"))
