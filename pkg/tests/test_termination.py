import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chrinfer.engine import Program, Status, derive, iter_redexes, normalize, step
from chrinfer.termination import (
    ProjectionError,
    RankSpec,
    RankSpecError,
    RuleStatus,
    SizePolynomial,
    TermVerdict,
    certify_rule,
    clp_projection,
    count_clauses,
    rank_certificate,
    rank_store,
    rank_term,
)
from chrinfer.terms import App, User, Var

from conftest import f_ground_goal, ground_terms, program

F_SPEC = RankSpec.parse("measure F 1; weight List 1")


def test_rank_spec_parse_and_print():
    spec = RankSpec.parse("measure F 1\nweight List 2  # lists are heavy\nmeasure G 1 2")
    assert spec.positions("F") == (1,) and spec.positions("G") == (1, 2)
    assert spec.weight("List") == 2 and spec.weight("Int") == 1
    assert RankSpec.parse(str(spec)) == spec


@pytest.mark.parametrize("text", ["measure F x", "weight List", "frobnicate", "measure F 0", "weight A -1"])
def test_rank_spec_errors(text):
    with pytest.raises(RankSpecError):
        RankSpec.parse(text)


def test_rank_of_ground_terms():
    t = App("List", (App("List", (App("Int"),)),))
    assert rank_term(F_SPEC, t) == 3
    assert rank_store(F_SPEC, [User("F", (t, App("Bool")))]) == 3
    with pytest.raises(ValueError):
        rank_term(F_SPEC, Var("a"))


def test_size_polynomial():
    a = Var("a")
    p = SizePolynomial.of_term(F_SPEC, App("List", (a,)))
    assert str(p) == "1 + size(a)"
    assert str(p - SizePolynomial.of_term(F_SPEC, a)) == "1"
    assert (p - p) == SizePolynomial()


def test_certify_rules():
    p = program("f.chr")
    certs = {r.name: certify_rule(r, F_SPEC) for r in p.rules}
    assert certs["F_fd1"].status is RuleStatus.TERMINATING_BY_LEMMA
    assert certs["F_inst1"].status is RuleStatus.CERTIFIED
    assert certs["F_inst2"].status is RuleStatus.CERTIFIED
    assert str(certs["F_inst2"].head_rank) == "1 + size(a)"
    assert str(certs["F_inst2"].body_rank) == "size(a)"


def test_non_decreasing_rule_not_certified():
    p = Program.parse("G a <=> G [a].\nH a ==> H a.")
    spec = RankSpec.parse("measure G 1; measure H 1")
    assert certify_rule(p.rules[0], spec).status is RuleStatus.NOT_CERTIFIED
    assert certify_rule(p.rules[1], spec).status is RuleStatus.NOT_CERTIFIABLE
    assert rank_certificate(p).verdict is TermVerdict.UNKNOWN


def test_auto_search_finds_f_spec():
    rep = rank_certificate(program("f.hs"))
    assert rep.verdict is TermVerdict.GROUND_TERMINATING and rep.searched
    assert str(rep.spec) == "measure F 1"
    assert rep.spec.weight("List") == 1


def test_given_spec_is_used():
    rep = rank_certificate(program("f.hs"), RankSpec.parse("measure F 2"))
    assert rep.verdict is TermVerdict.GROUND_TERMINATING and not rep.searched
    rep = rank_certificate(program("f.hs"), RankSpec.parse("measure G 1"))
    assert rep.verdict is TermVerdict.UNKNOWN
    assert "F_inst1: NOT-CERTIFIED" in rep.to_text()


def test_p_programs_certified():
    assert rank_certificate(program("p_false.chr")).verdict is TermVerdict.GROUND_TERMINATING
    assert rank_certificate(program("add.hs")).verdict is TermVerdict.GROUND_TERMINATING


def test_multi_headed_note():
    rep = rank_certificate(Program.parse("A x, B x <=> C x."))
    assert any("mono-headed" in n for n in rep.notes)
    assert rep.verdict is TermVerdict.GROUND_TERMINATING
    # nullary constraints have nothing to measure
    assert rank_certificate(Program.parse("A, B <=> C.")).verdict is TermVerdict.UNKNOWN


def test_report_json_shape():
    d = rank_certificate(program("f.hs")).to_dict()
    assert d["verdict"] == "GROUND-TERMINATING"
    assert {r["rule"] for r in d["rules"]} == {"F_fd1", "F_inst1", "F_inst1_imp1", "F_inst2", "F_inst2_imp1"}


# certified simplification steps must strictly lower the concrete rank
@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_certified_rank_decreases_on_ground_steps(rng):
    p = program("f.chr")
    s = normalize(f_ground_goal(rng, 5))
    while not s.failed:
        succ = [(r, step(p, s, r)) for r in iter_redexes(p, s)]
        if not succ:
            break
        r, t = rng.choice(succ)
        if not t.failed and r.rule.is_simp:
            assert rank_store(F_SPEC, t.users) < rank_store(F_SPEC, s.users)
        s = t


@given(ground_terms())
def test_polynomial_agrees_with_concrete_rank(t):
    assert SizePolynomial.of_term(F_SPEC, t) == SizePolynomial(rank_term(F_SPEC, t))


# --- projection -------------------------------------------------------------

def test_projection_of_f():
    text = clp_projection(program("f.hs"))
    assert text.splitlines()[2:] == ["f(int, bool).", "f(list(A), list(B)) :- f(A, B)."]
    assert count_clauses(text) == 2


def test_projection_of_eq_and_false():
    assert clp_projection(program("eq.hs")).splitlines()[-1] == "eq(list(A)) :- eq(A)."
    assert clp_projection(program("p_false.chr")).splitlines()[1:] == [
        "p(A) :- fail.",
        "p(A) :- A = list(B), p(B).",
    ]


def test_projection_one_clause_per_head():
    text = clp_projection(Program.parse("A x, B x <=> C x.\nD ==> A Int."))
    assert count_clauses(text) == 2
    assert "% omitted propagation rules: r2" in text


def test_projection_without_simplifications():
    text = clp_projection(Program.parse("D ==> E."))
    assert count_clauses(text) == 0 and text.startswith("%")


def test_projection_name_collision():
    with pytest.raises(ProjectionError):
        clp_projection(Program.parse("Foo x <=> x = FOO."))


def test_f_ground_goals_terminate():
    p = program("f.hs")
    rng = random.Random(7)
    for _ in range(50):
        out = derive(p, normalize(f_ground_goal(rng)))
        assert out.status in (Status.FINAL, Status.FALSE)
