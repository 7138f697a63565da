"""Command line entry point: ``chrinfer translate|infer|check|project|confluence``."""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import confluence, termination
from .confluence import DEFAULT_JOIN_DEPTH, DEFAULT_JOIN_WIDTH, LCVerdict
from .engine import DEFAULT_BOUND, FirstMatch, Program, RandomChoice, Status, derive, goal, render_state
from .parsing import ParseError
from .termination import ProjectionError, RankSpec, RankSpecError, TermVerdict
from .typeclasses import (
    DeclError,
    Declarations,
    consistency_condition,
    coverage_condition,
    parse_decls,
    superclass_rules,
    translate,
    weak_coverage_condition,
)

EXIT_OK = 0
EXIT_UNKNOWN = 1
EXIT_FALSE = 2
EXIT_ERROR = 3

_DECL_LINE = re.compile(r"^\s*(class|instance|data)\b", re.M)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="chrinfer", description="CHR-based type-class inference and soundness checks")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fuse=True):
        p.add_argument("--format", choices=["text", "json"], default="text")
        if fuse:
            p.add_argument("--fuse", action="store_true", help="fuse instance and improvement rules")

    p = sub.add_parser("translate", help="translate declarations into CHR rules")
    p.add_argument("decls", type=Path)
    p.add_argument("-o", "--output", type=Path)
    common(p)

    p = sub.add_parser("infer", help="run a depth-bounded derivation for a goal")
    p.add_argument("program", type=Path, help="declaration file or CHR program file")
    p.add_argument("goal", help="comma separated constraints, e.g. 'F [Int] b'")
    p.add_argument("--depth", type=_nonneg, default=DEFAULT_BOUND, help="depth bound B")
    p.add_argument("--strategy", choices=["first", "random"], default="first")
    p.add_argument("--probe", type=_positive, metavar="N", help="also run N random derivations")
    p.add_argument("--seed", type=int, default=0)
    common(p)

    p = sub.add_parser("check", help="check the relaxed soundness conditions")
    p.add_argument("program", type=Path, help="declaration file or CHR program file")
    p.add_argument("--join-depth", type=_positive, default=DEFAULT_JOIN_DEPTH)
    p.add_argument("--join-width", type=_positive, default=DEFAULT_JOIN_WIDTH)
    p.add_argument("--rank-spec", help="rank spec text or file, e.g. 'measure F 1; weight List 1'")
    common(p)

    p = sub.add_parser("project", help="write the CLP projection of the simplification rules")
    p.add_argument("program", type=Path)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--fuse", action="store_true")

    p = sub.add_parser("confluence", help="critical pairs and local confluence only")
    p.add_argument("program", type=Path)
    p.add_argument("--join-depth", type=_positive, default=DEFAULT_JOIN_DEPTH)
    p.add_argument("--join-width", type=_positive, default=DEFAULT_JOIN_WIDTH)
    common(p)
    return ap


def is_declaration_text(text: str) -> bool:
    return bool(_DECL_LINE.search(text))


def load(path: Path, fuse: bool = False) -> tuple[Program, Declarations | None]:
    text = path.read_text()
    if is_declaration_text(text) or path.suffix == ".hs" or not text.strip():
        decls = parse_decls(text)
        return translate(decls, fuse=fuse), decls
    return Program.parse(text), None


def _emit(args, data: dict, text: str, out) -> None:
    if args.format == "json":
        out.write(json.dumps(data, indent=2) + "\n")
    else:
        out.write(text.rstrip("\n") + "\n")


def rule_counts(decls: Declarations, prog: Program) -> list[tuple[str, int]]:
    rows = []
    names = [r.name for r in prog.rules]
    for c in decls.classes:
        n = sum(1 for x in names if x == f"{c.name}_class" or re.fullmatch(rf"{re.escape(c.name)}_fd\d+", x))
        rows.append((f"class {c.name}", n))
    for i in decls.instances:
        tag = f"{i.name}_inst{i.index}"
        n = sum(1 for x in names if x == tag or x.startswith(tag + "_imp"))
        rows.append((f"instance {i}", n))
    return rows


def cmd_translate(args, out) -> int:
    text = args.decls.read_text()
    decls = parse_decls(text)
    prog = translate(decls, fuse=args.fuse)
    counts = rule_counts(decls, prog)
    summary = "".join(f"{label}: {n} rule(s)\n" for label, n in counts) + f"total: {len(prog)} rule(s)\n"
    if args.format == "json":
        data = {"rules": [str(r) for r in prog.rules], "counts": dict(counts), "total": len(prog)}
        if args.output:
            args.output.write_text(str(prog))
        out.write(json.dumps(data, indent=2) + "\n")
        return EXIT_OK
    if args.output:
        args.output.write_text(str(prog))
        out.write(summary)
    else:
        out.write(str(prog))
        sys.stderr.write(summary)
    return EXIT_OK


def cmd_infer(args, out) -> int:
    prog, _ = load(args.program, args.fuse)
    g = goal(args.goal)
    known = prog.head_names()
    if not g.failed:
        for name in sorted({u.name for u in g.users} - known):
            sys.stderr.write(f"warning: no rule mentions {name}; the constraint is inert\n")
    strat = FirstMatch() if args.strategy == "first" else RandomChoice(args.seed)
    res = derive(prog, g, args.depth, strat)
    data: dict = {"goal": args.goal, "steps": res.steps, "bound": args.depth}
    if res.status is Status.FINAL:
        line = f"answer: {render_state(res.state)}"
        data.update(status="answer", answer=render_state(res.state))
        code = EXIT_OK
    elif res.status is Status.FALSE:
        line = "false"
        data.update(status="false", answer="False")
        code = EXIT_FALSE
    else:
        line = f"unknown (depth bound {args.depth} exceeded)"
        data.update(status="unknown", answer=None)
        code = EXIT_UNKNOWN
    lines = [line]
    if args.probe:
        rep = confluence.uniqueness_probe(prog, g, args.probe, args.depth, args.seed)
        data["probe"] = rep.to_dict()
        verdict = "PASS" if rep.passed else "FAIL"
        lines.append(
            f"probe: {verdict} ({rep.runs} runs, {len(rep.answers)} distinct answer(s), "
            f"{rep.depth_exceeded} over the bound)"
        )
        if rep.counterexample:
            lines.append(f"  counterexample: {rep.counterexample[0]}  vs  {rep.counterexample[1]}")
    _emit(args, data, "\n".join(lines), out)
    return code


def _rank_spec(arg: str | None) -> RankSpec | None:
    if not arg:
        return None
    p = Path(arg)
    text = p.read_text() if p.exists() else arg
    return RankSpec.parse(text)


def cmd_check(args, out) -> int:
    prog, decls = load(args.program, args.fuse)
    data: dict = {"program": str(args.program), "rules": [str(r) for r in prog.rules]}
    lines = []
    if decls is not None:
        for rep in (consistency_condition(decls), coverage_condition(decls), weak_coverage_condition(decls)):
            data[rep.condition.replace(" ", "_")] = rep.to_dict()
            lines.append(rep.to_text())
        supers = superclass_rules(prog)
        if supers:
            data["superclass_rules"] = supers
            lines.append("superclass rules (propagate user constraints): " + ", ".join(supers))
    rr = confluence.range_restricted_syntactic(prog)
    data["range_restriction"] = rr.to_dict()
    lines.append(f"range restriction: {'PASS' if rr.ok else 'FAIL'}")
    for c in rr.failures():
        lines.append(f"  FAIL {c.rule}: unresolved {', '.join(str(v) for v in c.offenders)}")
    lc = confluence.local_confluence_check(prog, args.join_depth, args.join_width)
    data["local_confluence"] = lc.to_dict()
    lines.append(lc.to_text())
    gt = termination.rank_certificate(prog, _rank_spec(args.rank_spec))
    data["ground_termination"] = gt.to_dict()
    lines.append(gt.to_text())
    if not rr.ok or lc.verdict is LCVerdict.NOT_LOCALLY_CONFLUENT:
        overall, code = "UNSAFE", EXIT_FALSE
    elif lc.verdict is LCVerdict.LOCALLY_CONFLUENT and gt.verdict is TermVerdict.GROUND_TERMINATING:
        overall, code = "SAFE", EXIT_OK
    else:
        overall, code = "UNKNOWN", EXIT_UNKNOWN
    data["overall"] = overall
    lines.append(f"overall: {overall}")
    _emit(args, data, "\n".join(lines), out)
    return code


def cmd_project(args, out) -> int:
    prog, _ = load(args.program, args.fuse)
    text = termination.clp_projection(prog)
    if args.output:
        args.output.write_text(text)
        out.write(f"{termination.count_clauses(text)} clause(s) written to {args.output}\n")
    else:
        out.write(text)
    return EXIT_OK


def cmd_confluence(args, out) -> int:
    prog, _ = load(args.program, args.fuse)
    lc = confluence.local_confluence_check(prog, args.join_depth, args.join_width)
    _emit(args, lc.to_dict(), lc.to_text(), out)
    return {
        LCVerdict.LOCALLY_CONFLUENT: EXIT_OK,
        LCVerdict.UNKNOWN: EXIT_UNKNOWN,
        LCVerdict.NOT_LOCALLY_CONFLUENT: EXIT_FALSE,
    }[lc.verdict]


COMMANDS = {
    "translate": cmd_translate,
    "infer": cmd_infer,
    "check": cmd_check,
    "project": cmd_project,
    "confluence": cmd_confluence,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except (ParseError, DeclError, RankSpecError, ProjectionError, ValueError) as e:
        sys.stderr.write(f"chrinfer: error: {e}\n")
        return EXIT_ERROR
    except OSError as e:
        sys.stderr.write(f"chrinfer: error: {e}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
