"""CHR engine for type-class inference with functional dependencies."""

from .confluence import critical_pairs, joinable, local_confluence_check, range_restricted_syntactic, uniqueness_probe
from .engine import FALSE_STATE, Program, Rule, State, derive, goal, normalize, reachable, render_state, state_equiv
from .parsing import ParseError, parse_constraints, parse_term
from .termination import RankSpec, clp_projection, rank_certificate
from .typeclasses import (
    consistency_condition,
    coverage_condition,
    parse_decls,
    translate,
    weak_coverage_condition,
)

__version__ = "0.1.0"

__all__ = [
    "FALSE_STATE",
    "ParseError",
    "Program",
    "RankSpec",
    "Rule",
    "State",
    "clp_projection",
    "consistency_condition",
    "coverage_condition",
    "critical_pairs",
    "derive",
    "goal",
    "joinable",
    "local_confluence_check",
    "normalize",
    "parse_constraints",
    "parse_decls",
    "parse_term",
    "range_restricted_syntactic",
    "rank_certificate",
    "reachable",
    "render_state",
    "state_equiv",
    "translate",
    "uniqueness_probe",
    "weak_coverage_condition",
]
