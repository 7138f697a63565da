import random
import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

from chrinfer.cli import load
from chrinfer.terms import App, Kind, User, Var

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture(name: str) -> Path:
    return FIXTURES / name


def program(name: str, fuse: bool = False):
    return load(fixture(name), fuse)[0]


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# --- hypothesis strategies --------------------------------------------------

GLOBAL_NAMES = ["a", "b", "c", "d"]
CONSTANTS = ["Int", "Bool", "Zero"]
UNARY = ["List", "Succ", "Maybe"]
BINARY = ["Pair", "Fun"]


def terms(var_names=GLOBAL_NAMES, kind=Kind.GLOBAL, max_leaves=8):
    leaves = st.sampled_from([App(c) for c in CONSTANTS])
    if var_names:
        leaves = leaves | st.sampled_from([Var(n, kind) for n in var_names])

    def extend(children):
        return st.one_of(
            st.builds(lambda f, x: App(f, (x,)), st.sampled_from(UNARY), children),
            st.builds(lambda f, x, y: App(f, (x, y)), st.sampled_from(BINARY), children, children),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def ground_terms(max_leaves=8):
    return terms(var_names=[], max_leaves=max_leaves)


# --- random goals for the fixture programs ----------------------------------

def random_type(rng: random.Random, depth: int, base=("Int", "Bool")) -> App:
    """A ground type built from ``base`` constants and lists, nesting at most ``depth``."""
    d = rng.randint(0, depth)
    t = App(rng.choice(base))
    for _ in range(d):
        t = App("List", (t,))
    return t


def random_nat(rng: random.Random, depth: int) -> App:
    t = App("Zero")
    for _ in range(rng.randint(0, depth)):
        t = App("Succ", (t,))
    return t


def f_ground_goal(rng: random.Random, depth: int = 8) -> list:
    cs = []
    for _ in range(rng.randint(1, 3)):
        a = random_type(rng, depth)
        if rng.random() < 0.5:
            b = _f_image(a)
        else:
            b = random_type(rng, depth)
        cs.append(User("F", (a, b)))
    return cs


def _f_image(t: App) -> App:
    if t.functor == "List":
        return App("List", (_f_image(t.args[0]),))
    return App("Bool") if t.functor == "Int" else t


def f_open_goal(rng: random.Random, depth: int = 8) -> list:
    """``F t v`` goals with a fresh global target: terminating, non-ground answers."""
    cs = []
    for k in range(rng.randint(1, 3)):
        cs.append(User("F", (random_type(rng, depth), Var(GLOBAL_NAMES[k]))))
    if len(cs) > 1 and rng.random() < 0.3:
        cs.append(User("F", (cs[0].args[0], Var("d"))))
    return cs


def coll_goal(rng: random.Random, depth: int = 6, ground: bool = False) -> list:
    cs = []
    for k in range(rng.randint(1, 3)):
        inner = random_type(rng, depth)
        c = App("List", (inner,))
        if ground:
            e = inner if rng.random() < 0.6 else random_type(rng, depth)
        else:
            e = Var(GLOBAL_NAMES[k])
        cs.append(User("Coll", (c, e)))
    return cs


def add_goal(rng: random.Random, depth: int = 6, ground: bool = False) -> list:
    cs = []
    for k in range(rng.randint(1, 3)):
        a, b = random_nat(rng, depth), random_nat(rng, depth)
        if ground:
            c = _add(a, b) if rng.random() < 0.6 else random_nat(rng, 2 * depth)
        else:
            c = Var(GLOBAL_NAMES[k])
        cs.append(User("Add", (a, b, c)))
    return cs


def _add(a: App, b: App) -> App:
    return b if a.functor == "Zero" else App("Succ", (_add(a.args[0], b),))


def eq_goal(rng: random.Random, depth: int = 6) -> list:
    return [User("Eq", (random_type(rng, depth),)) for _ in range(rng.randint(1, 3))]


def p_goal(rng: random.Random, depth: int = 6) -> list:
    return [User("P", (random_type(rng, depth),)) for _ in range(rng.randint(1, 2))]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
