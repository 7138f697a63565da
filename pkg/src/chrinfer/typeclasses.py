"""Class and instance declarations with functional dependencies.

Declarations are translated into CHR rules (class, FD, instance and
improvement rules) and checked against the Consistency, Coverage and Weak
Coverage conditions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .engine import Program, Rule, RuleKind
from .parsing import ParseError, parse_constraint, parse_constraints
from .terms import (
    TRUE,
    App,
    Equation,
    Kind,
    Term,
    User,
    Var,
    format_term,
    subst_term,
    unify_pairs,
    var_key,
    vars_of,
)


class DeclError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class FunDep:
    sources: tuple  # 1-based argument positions
    target: int

    def format(self, params) -> str:
        src = " ".join(str(params[i - 1]) for i in self.sources)
        return f"{src} -> {params[self.target - 1]}"


@dataclass(frozen=True)
class ClassDecl:
    name: str
    params: tuple
    context: tuple = ()
    fundeps: tuple = ()

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def head(self) -> User:
        return User(self.name, self.params)


@dataclass(frozen=True)
class InstanceDecl:
    name: str
    args: tuple
    context: tuple = ()
    index: int = 1  # position among the instances of its class

    @property
    def head(self) -> User:
        return User(self.name, self.args)

    def __str__(self) -> str:
        return str(self.head)


@dataclass
class Declarations:
    classes: list = field(default_factory=list)
    instances: list = field(default_factory=list)

    def cls(self, name: str) -> ClassDecl | None:
        for c in self.classes:
            if c.name == name:
                return c
        return None

    def __iter__(self):
        return iter((self.classes, self.instances))


_KEYWORD = re.compile(r"\b(class|instance|data|newtype|type)\b")


def _segments(text: str):
    """Yield ``(line, column, keyword, body)`` for each declaration."""
    in_where = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("--", 1)[0]
        if not line.strip():
            continue
        if line[0].isspace() and in_where:
            continue
        in_where = False
        for chunk_start, chunk in _split_semis(line):
            starts = [m for m in _KEYWORD.finditer(chunk)]
            if not starts or chunk[: starts[0].start()].strip():
                col = chunk_start + len(chunk) - len(chunk.lstrip()) + 1
                raise DeclError("expected 'class', 'instance' or 'data'", lineno, col)
            for k, m in enumerate(starts):
                end = starts[k + 1].start() if k + 1 < len(starts) else len(chunk)
                body = chunk[m.end():end]
                w = re.search(r"\bwhere\b", body)
                if w:
                    body = body[: w.start()]
                    in_where = True
                yield lineno, chunk_start + m.end() + 1, m.group(1), body


def _split_semis(line: str):
    pos = 0
    for part in line.split(";"):
        yield pos, part
        pos += len(part) + 1


def _parse_context(text: str, line: int, col: int) -> tuple:
    t = text.strip()
    if t.startswith("(") and t.endswith(")"):
        t = t[1:-1]
    try:
        cs = parse_constraints(t, Kind.PROG)
    except ParseError as e:
        raise DeclError(e.message, line, col + (e.pos or 0)) from None
    for c in cs:
        if not isinstance(c, User):
            raise DeclError(f"context may only hold class constraints, not {c}", line, col)
    return tuple(cs)


def _parse_head(text: str, line: int, col: int) -> User:
    try:
        c = parse_constraint(text.strip(), Kind.PROG)
    except ParseError as e:
        raise DeclError(e.message, line, col + (e.pos or 0)) from None
    if not isinstance(c, User):
        raise DeclError(f"expected a class constraint, found {c}", line, col)
    return c


def _split_context(body: str) -> tuple[str, str]:
    if "=>" in body:
        ctx, rest = body.split("=>", 1)
        return ctx, rest
    return "", body


def _parse_class(body: str, line: int, col: int) -> ClassDecl:
    decl, _, fds_text = body.partition("|")
    ctx_text, head_text = _split_context(decl)
    context = _parse_context(ctx_text, line, col) if ctx_text.strip() else ()
    head = _parse_head(head_text, line, col)
    params = head.args
    for p in params:
        if not isinstance(p, Var):
            raise DeclError(f"class parameter {format_term(p)} is not a variable", line, col)
    if len(set(params)) != len(params):
        raise DeclError(f"repeated class parameter in {head}", line, col)
    stray = [v for v in vars_of(context) if v not in params]
    if stray:
        raise DeclError(f"context variable {stray[0]} is not a class parameter", line, col)
    index = {p.name: i + 1 for i, p in enumerate(params)}
    fundeps: list[FunDep] = []
    if fds_text.strip():
        for fd_text in fds_text.split(","):
            lhs, arrow, rhs = fd_text.partition("->")
            if not arrow or not rhs.split():
                raise DeclError(f"malformed functional dependency {fd_text.strip()!r}", line, col)
            try:
                srcs = tuple(sorted(index[n] for n in lhs.split()))
                tgts = [index[n] for n in rhs.split()]
            except KeyError as e:
                raise DeclError(f"unknown class parameter {e.args[0]} in dependency", line, col) from None
            for t in tgts:
                if t in srcs:
                    raise DeclError(f"dependency target {params[t - 1]} is also a source", line, col)
                fd = FunDep(srcs, t)
                if fd in fundeps:
                    raise DeclError(f"duplicate functional dependency {fd.format(params)}", line, col)
                fundeps.append(fd)
    return ClassDecl(head.name, params, context, tuple(fundeps))


def parse_decls(text: str) -> Declarations:
    """Parse ``class``/``instance`` declarations; ``data`` lines and ``where`` bodies are skipped."""
    decls = Declarations()
    counts: dict[str, int] = {}
    for line, col, kw, body in _segments(text):
        if kw in ("data", "newtype", "type"):
            continue
        if kw == "class":
            c = _parse_class(body, line, col)
            if decls.cls(c.name):
                raise DeclError(f"class {c.name} declared twice", line, col)
            decls.classes.append(c)
            continue
        ctx_text, head_text = _split_context(body)
        context = _parse_context(ctx_text, line, col) if ctx_text.strip() else ()
        head = _parse_head(head_text, line, col)
        cls = decls.cls(head.name)
        if cls is None:
            raise DeclError(f"instance of unknown class {head.name}", line, col)
        if len(head.args) != cls.arity:
            raise DeclError(
                f"class {cls.name} takes {cls.arity} arguments, instance gives {len(head.args)}", line, col
            )
        counts[head.name] = counts.get(head.name, 0) + 1
        decls.instances.append(InstanceDecl(head.name, head.args, context, counts[head.name]))
    return decls


# --- translation ------------------------------------------------------------

def _fresh(base: Var, taken: set) -> Var:
    name = base.name + "'"
    while name in taken:
        name += "'"
    taken.add(name)
    return Var(name, Kind.PROG)


def needs_improvement(inst: InstanceDecl, fd: FunDep) -> bool:
    """An improvement rule is emitted unless the target is a variable absent from the sources."""
    t = inst.args[fd.target - 1]
    if not isinstance(t, Var):
        return True
    return t in vars_of([inst.args[i - 1] for i in fd.sources])


def _fusable(imps: list) -> bool:
    targets = {fd.target for _, fd in imps}
    sources = {i for _, fd in imps for i in fd.sources}
    return bool(imps) and not (targets & sources)


def translate(decls: Declarations, fuse: bool = False) -> Program:
    rules: list[Rule] = []
    for cls in decls.classes:
        if cls.context:
            rules.append(Rule(f"{cls.name}_class", RuleKind.PROP, (cls.head,), cls.context))
        for i, fd in enumerate(cls.fundeps, 1):
            taken = {p.name for p in cls.params}
            other = tuple(
                p if j + 1 in fd.sources else _fresh(p, taken) for j, p in enumerate(cls.params)
            )
            t = fd.target - 1
            rules.append(
                Rule(
                    f"{cls.name}_fd{i}",
                    RuleKind.PROP,
                    (cls.head, User(cls.name, other)),
                    (Equation(cls.params[t], other[t]),),
                )
            )
    for inst in decls.instances:
        cls = decls.cls(inst.name)
        tag = f"{inst.name}_inst{inst.index}"
        imps = [(i, fd) for i, fd in enumerate(cls.fundeps, 1) if needs_improvement(inst, fd)]
        taken = {v.name for v in vars_of(inst.args)} | {v.name for v in vars_of(inst.context)}
        if fuse and _fusable(imps):
            gen = {fd.target for _, fd in imps}
            head = []
            eqs = []
            for j, t in enumerate(inst.args):
                if j + 1 in gen:
                    b = _fresh(cls.params[j], taken)
                    head.append(b)
                    eqs.append(Equation(b, t))
                else:
                    head.append(t)
            rules.append(Rule(tag, RuleKind.SIMP, (User(inst.name, tuple(head)),), tuple(eqs) + inst.context))
            continue
        rules.append(Rule(tag, RuleKind.SIMP, (inst.head,), inst.context or (TRUE,)))
        for i, fd in imps:
            names = set(taken)
            b = tuple(
                t if j + 1 in fd.sources else _fresh(cls.params[j], names) for j, t in enumerate(inst.args)
            )
            k = fd.target - 1
            rules.append(
                Rule(f"{tag}_imp{i}", RuleKind.PROP, (User(inst.name, b),), (Equation(b[k], inst.args[k]),))
            )
    return Program(tuple(rules))


def superclass_rules(p: Program) -> list[str]:
    return [r.name for r in p.rules if not r.is_simp and not r.purely_builtin]


# --- conditions -------------------------------------------------------------

@dataclass(frozen=True)
class ConditionCheck:
    condition: str
    subject: str
    fundep: str
    ok: bool
    detail: str = ""


@dataclass
class ConditionReport:
    condition: str
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def verdict(self) -> str:
        return "PASS" if self.ok else "FAIL"

    def failures(self) -> list:
        return [c for c in self.checks if not c.ok]

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "checks": [
                {"subject": c.subject, "fundep": c.fundep, "ok": c.ok, "detail": c.detail} for c in self.checks
            ],
        }

    def to_text(self) -> str:
        lines = [f"{self.condition}: {self.verdict}"]
        for c in self.checks:
            mark = "ok  " if c.ok else "FAIL"
            lines.append(f"  {mark} {c.subject} | {c.fundep}" + (f": {c.detail}" if c.detail else ""))
        return "\n".join(lines)


def _fmt_vars(vs) -> str:
    return "{" + ", ".join(str(v) for v in sorted(vs, key=var_key)) + "}"


def _rename_apart(inst: InstanceDecl, avoid: set) -> tuple:
    ren = {}
    for v in vars_of(inst.args):
        name = v.name
        while name in avoid:
            name += "'"
        avoid.add(name)
        ren[v] = Var(name, v.kind)
    return tuple(subst_term(ren, t) for t in inst.args)


def _rigid(terms, fixed: set):
    sk = {v: App("$" + v.name) for v in fixed}
    return [subst_term(sk, t) for t in terms]


def consistency_condition(decls: Declarations) -> ConditionReport:
    """Instances agreeing on a dependency's sources must agree on its target.

    Distinct instances use the mgu of the source positions directly.  For an
    instance paired with a renamed copy of itself the targets need only be
    unifiable without further instantiating the source positions.
    """
    checks = []
    for cls in decls.classes:
        insts = [i for i in decls.instances if i.name == cls.name]
        for a in range(len(insts)):
            for b in range(a, len(insts)):
                t = insts[a].args
                s = _rename_apart(insts[b], {v.name for v in vars_of(t)})
                subject = f"{insts[a]} ~ {insts[b]}" + (" (renamed copy)" if a == b else "")
                for fd in cls.fundeps:
                    src = [(t[i - 1], s[i - 1]) for i in fd.sources]
                    theta = unify_pairs(src)
                    fd_text = fd.format(cls.params)
                    if theta is None:
                        checks.append(ConditionCheck("consistency", subject, fd_text, True, "sources do not unify"))
                        continue
                    lt = subst_term(theta, t[fd.target - 1])
                    rt = subst_term(theta, s[fd.target - 1])
                    witness = ", ".join(f"{v} := {format_term(x)}" for v, x in sorted(theta.items(), key=lambda kv: var_key(kv[0])))
                    if a == b:
                        fixed = set(vars_of([subst_term(theta, x) for pair in src for x in pair]))
                        lr, rr = _rigid([lt, rt], fixed)
                        ok = unify_pairs([(lr, rr)]) is not None
                    else:
                        ok = lt == rt
                    detail = f"theta = {{{witness}}}: {format_term(lt)} vs {format_term(rt)}"
                    checks.append(ConditionCheck("consistency", subject, fd_text, ok, detail))
    return ConditionReport("consistency", checks)


def coverage_condition(decls: Declarations) -> ConditionReport:
    checks = []
    for inst in decls.instances:
        cls = decls.cls(inst.name)
        for fd in cls.fundeps:
            src = set(vars_of([inst.args[i - 1] for i in fd.sources]))
            tgt = inst.args[fd.target - 1]
            missing = [v for v in vars_of(tgt) if v not in src]
            detail = "" if not missing else f"vars({format_term(tgt)}) not a subset of {_fmt_vars(src)}; missing {_fmt_vars(missing)}"
            checks.append(ConditionCheck("coverage", str(inst), fd.format(cls.params), not missing, detail))
    return ConditionReport("coverage", checks)


def closure(decls: Declarations, context, vs) -> list[set]:
    """Successive covered-variable sets, starting from ``vs``, until stable."""
    current = set(vs)
    trail = [set(current)]
    while True:
        added = set()
        for c in context:
            cls = decls.cls(c.name)
            if cls is None or len(c.args) != cls.arity:
                continue
            for fd in cls.fundeps:
                if set(vars_of([c.args[i - 1] for i in fd.sources])) <= current:
                    added |= set(vars_of(c.args[fd.target - 1]))
        if added <= current:
            return trail
        current |= added
        trail.append(set(current))


def weak_coverage_condition(decls: Declarations) -> ConditionReport:
    checks = []
    for inst in decls.instances:
        cls = decls.cls(inst.name)
        for fd in cls.fundeps:
            vs = vars_of([inst.args[i - 1] for i in fd.sources])
            trail = closure(decls, inst.context, vs)
            tgt = inst.args[fd.target - 1]
            missing = [v for v in vars_of(tgt) if v not in trail[-1]]
            detail = "closure " + " -> ".join(_fmt_vars(s) for s in trail)
            if missing:
                detail += f"; missing {_fmt_vars(missing)}"
            checks.append(ConditionCheck("weak coverage", str(inst), fd.format(cls.params), not missing, detail))
    return ConditionReport("weak coverage", checks)
