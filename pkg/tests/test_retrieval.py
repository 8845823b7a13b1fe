import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptevo.concept import (And, Atomic, BoolEq, DataGE, DataLE, Exists, Forall, MaxCard,
                                MinCard, Not, Or, Thing, parse)
from conceptevo.kb import load_kb
from conceptevo.retrieval import (Confusion, LearningProblem, Retriever, confusion, dump_problem,
                                  load_problem, retrieve)
from oracles import model_check

ALL = {"ann", "bob", "cat", "dan"}


@pytest.mark.parametrize("text, expected", [
    ("Thing", ALL),
    ("exists hasChild.(Female)", {"ann"}),
    ("forall hasChild.(Male)", {"bob", "cat", "dan"}),
    ("age >= 39", {"ann", "bob"}),
    ("min 1 married.(Thing)", {"ann", "bob"}),
    ("age <= 38", {"cat", "dan"}),
    ("employed = true", {"ann"}),
    ("employed = false", {"bob"}),
    ("not(employed = true)", {"bob", "cat", "dan"}),
    ("max 0 hasChild.(Thing)", {"bob", "cat", "dan"}),
    ("exists married.(exists hasSibling.(Male))", {"ann"}),
])
def test_retrieve_fixture(mini, text, expected):
    assert retrieve(mini, parse(text)) == expected


def test_confusion(mini, males_problem):
    assert confusion(mini, Atomic("Male"), males_problem) == Confusion(2, 0, 2, 0)
    p = LearningProblem({"ann"}, {"bob", "cat"})
    assert confusion(mini, Thing, p) == (1, 2, 0, 0)
    assert confusion(mini, Not(Thing), p) == (0, 0, 2, 1)


def test_unknown_symbols(mini):
    with pytest.raises(KeyError):
        retrieve(mini, Atomic("Robot"))
    with pytest.raises(KeyError):
        retrieve(mini, Exists("likes", Thing))


def test_cache_is_transparent(mini):
    r = Retriever(mini, max_cache=2)
    c = parse("and(Female, exists hasChild.(Female))")
    first = r.retrieve(c)
    for _ in range(3):
        assert r.retrieve(c) == first
    with pytest.raises(ValueError):
        r.mask(c)[0] = True


def test_problem_io():
    p, pos, neg = load_problem("pos a\n# c\nneg b\npos c\n")
    assert p == LearningProblem({"a", "c"}, {"b"}) and pos == ["a", "c"] and neg == ["b"]
    assert load_problem(dump_problem(pos, neg))[0] == p


# Random small KBs checked against the per-instance oracle.

_inds = [f"i{k}" for k in range(6)]


@st.composite
def small_kbs(draw):
    lines = ["class A", "class B", "subclass A B", "objprop r", "objprop s",
             "dataprop d numeric", "dataprop b boolean"]
    for x in _inds:
        lines.append(f"type {x} {draw(st.sampled_from(['A', 'B']))}")
    for _ in range(draw(st.integers(0, 12))):
        lines.append(f"rel {draw(st.sampled_from(_inds))} {draw(st.sampled_from(['r', 's']))} "
                     f"{draw(st.sampled_from(_inds))}")
    for _ in range(draw(st.integers(0, 8))):
        lines.append(f"data {draw(st.sampled_from(_inds))} d {draw(st.integers(0, 9))}")
    for _ in range(draw(st.integers(0, 4))):
        lines.append(f"data {draw(st.sampled_from(_inds))} b "
                     f"{draw(st.sampled_from(['true', 'false']))}")
    return load_kb("\n".join(lines) + "\n")


_roles = st.sampled_from(["r", "s"])
_leaf = st.one_of(
    st.just(Thing), st.sampled_from(["A", "B"]).map(Atomic),
    st.builds(DataLE, st.just("d"), st.integers(-1, 10).map(lambda v: v + 0.5)),
    st.builds(DataGE, st.just("d"), st.integers(-1, 10).map(float)),
    st.builds(BoolEq, st.just("b"), st.booleans()),
)
concepts = st.recursive(_leaf, lambda sub: st.one_of(
    st.builds(Not, sub), st.builds(And, sub, sub), st.builds(Or, sub, sub),
    st.builds(Exists, _roles, sub), st.builds(Forall, _roles, sub),
    st.builds(MinCard, st.integers(1, 3), _roles, sub),
    st.builds(MaxCard, st.integers(0, 3), _roles, sub),
), max_leaves=8)


@settings(max_examples=300, deadline=None)
@given(small_kbs(), concepts)
def test_matches_oracle(kb, c):
    assert Retriever(kb).retrieve(c) == model_check(kb, c)


@settings(max_examples=150, deadline=None)
@given(small_kbs(), concepts, concepts, _roles)
def test_identities(kb, c, d, r):
    R = Retriever(kb).retrieve
    every = set(kb.instances)
    assert R(Not(And(c, d))) == R(Or(Not(c), Not(d)))
    assert R(Not(Or(c, d))) == R(And(Not(c), Not(d)))
    assert R(Exists(r, c)) == R(MinCard(1, r, c))
    assert R(MaxCard(0, r, c)) == every - R(Exists(r, c))
    assert R(Forall(r, c)) == every - R(Exists(r, Not(c)))
    assert R(Not(Not(c))) == R(c)


@settings(max_examples=150, deadline=None)
@given(small_kbs(), concepts, concepts, _roles, st.integers(1, 3))
def test_monotonicity(kb, c, d, r, n):
    R = Retriever(kb).retrieve
    cd = And(c, d)
    assert R(cd) <= R(c)
    assert R(Exists(r, cd)) <= R(Exists(r, c))
    assert R(Forall(r, cd)) <= R(Forall(r, c))
    assert R(MinCard(n, r, cd)) <= R(MinCard(n, r, c))
    assert R(MinCard(n + 1, r, c)) <= R(MinCard(n, r, c))
    assert R(MaxCard(n, r, c)) <= R(MaxCard(n, r, cd))
