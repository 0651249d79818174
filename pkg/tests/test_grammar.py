import pytest

from conftest import check_genotype
from tagsysid.exceptions import (
    FootAdjunction,
    GrammarError,
    IncompleteTree,
    LabelMismatch,
    NotALeaf,
    NullAdjunctionViolation,
    UnknownGrammar,
)
from tagsysid.genotype import random_genotype, tokens
from tagsysid.grammar import (
    BUILTIN_GRAMMARS,
    DerivedTree,
    adjoin,
    builtin_grammar,
    parse_grammar,
    parse_tree,
    substitute,
    to_sexpr,
    validate_derived,
    yield_string,
)
from tagsysid.model import parse_model

TOY = """
nonterminals: X Y
terminals: a b
start: X
initial root: (X a Y)
initial leaf: (Y b)
initial deep: (Y (Y@na b) a)
auxiliary grow: (Y Y@foot a)
"""


def aux(g, name):
    return next(t for t in g.auxiliary_trees if t.name == name)


def init(g, name):
    return next(t for t in g.initial_trees if t.name == name)


@pytest.fixture
def toy():
    return parse_grammar(TOY)


def test_elementary_tree_shape(toy):
    grow = aux(toy, "grow")
    assert grow.foot_address == (0,)
    assert init(toy, "root").substitution_sites == (((1,), "Y"),)
    # na nodes are not offered for adjunction
    assert ((0,), "Y") not in init(toy, "deep").adjoinable


@pytest.mark.parametrize("text", [
    "nonterminals: X\nterminals: a\nstart: X\ninitial r: (X X@foot a)\n",
    "nonterminals: X Y\nterminals: a\nstart: X\ninitial r: (X a)\nauxiliary b: (X Y@foot a)\n",
    "nonterminals: X\nterminals: a\nstart: X\ninitial r: (X a)\nauxiliary b: (X a)\n",
    "nonterminals: X\nterminals: a\nstart: Z\ninitial r: (X a)\n",
])
def test_malformed_grammars_rejected(text):
    with pytest.raises(GrammarError):
        parse_grammar(text)


def test_substitution_node_count():
    g = parse_grammar("nonterminals: R X\nterminals: a b\nstart: R\n"
                      "initial r: (R X)\ninitial x: (X a (X b))\n")
    t = DerivedTree.from_initial(init(g, "r"))
    x = init(g, "x")
    out = substitute(t, (0,), x)
    assert out.size() == 2 - 1 + x.size()


def test_substitution_at_terminal_rejected(toy):
    t = DerivedTree.from_initial(init(toy, "root"))
    with pytest.raises(NotALeaf):
        substitute(t, (0,), init(toy, "leaf"))


def test_substitution_label_mismatch(toy):
    t = DerivedTree.from_initial(init(toy, "root"))
    with pytest.raises(LabelMismatch):
        substitute(t, (1,), init(toy, "root"))


def test_adjunction_node_count(toy):
    t = substitute(DerivedTree.from_initial(init(toy, "root")), (1,), init(toy, "deep"))
    k = t.at((1,)).size()
    grow = aux(toy, "grow")
    out = adjoin(t, (1,), grow)
    assert out.size() == (t.size() - k) + grow.size() + k - 1
    assert out.adjunctions == 1


def test_adjunction_constraints(toy):
    t = substitute(DerivedTree.from_initial(init(toy, "root")), (1,), init(toy, "deep"))
    with pytest.raises(NullAdjunctionViolation):
        adjoin(t, (1, 0), aux(toy, "grow"))
    with pytest.raises(LabelMismatch):
        adjoin(t, (), aux(toy, "grow"))
    with pytest.raises(LabelMismatch):
        adjoin(t, (0,), aux(toy, "grow"))


def test_adjunction_at_foot_rejected(toy):
    grow = aux(toy, "grow")
    t = DerivedTree(grow.root)
    with pytest.raises(FootAdjunction):
        adjoin(t, grow.foot_address, grow)


def test_beta8_root_is_null_adjunction():
    g = builtin_grammar("full")
    beta8 = aux(g, "beta8")
    assert beta8.root.na
    base = DerivedTree(beta8.root.replace_at(beta8.foot_address, init(g, "alpha1").root))
    with pytest.raises(NullAdjunctionViolation):
        adjoin(base, (), aux(g, "beta4"))


def test_yield_requires_complete_tree(toy):
    with pytest.raises(IncompleteTree):
        yield_string(DerivedTree.from_initial(init(toy, "root")))


def test_minimal_alpha1_yield():
    g = builtin_grammar("narx")
    t = DerivedTree.from_initial(init(g, "alpha1"))
    validate_derived(t, g)
    toks = yield_string(t)
    assert toks == ["1"]
    m = parse_model(toks)
    assert m.p == 1 and m.terms[0].factors == ()


def _u_term(g, lag=0):
    t = DerivedTree.from_initial(init(g, "alpha1"))
    t = adjoin(t, (0, 0, 0), aux(g, "beta1"))
    for _ in range(lag):
        d = next(a for a, n in t.root.walk() if n.label == "D")
        t = adjoin(t, d, aux(g, "beta5"))
    return t


def test_lag_increment_changes_only_lag_tokens():
    g = builtin_grammar("narx")
    t = _u_term(g)
    before = yield_string(t)
    d = next(a for a, n in t.root.walk() if n.label == "D")
    after = yield_string(adjoin(t, d, aux(g, "beta5")))
    assert before == ["1", "*", "u", "k"]
    assert after == before + ["q"]
    assert str(parse_model(after)) == "u_{k-1}"


def test_narx_admits_y1_u2_product():
    g = builtin_grammar("narx")
    t = _u_term(g, lag=2)
    m_addr = next(a for a, n in t.root.walk() if n.label == "M")
    t = adjoin(t, m_addr, aux(g, "beta2"))
    validate_derived(t, g)
    m = parse_model(yield_string(t))
    assert m.p == 1
    assert {(f.source, f.lag) for f in m.terms[0].factors} == {("y", 1), ("u", 2)}


def test_full_admits_abs_term():
    g = builtin_grammar("full")
    t = DerivedTree.from_initial(init(g, "alpha4"))
    t = adjoin(t, next(a for a, n in t.root.walk() if n.label == "M"), aux(g, "beta1"))
    t = adjoin(t, next(a for a, n in t.root.walk() if n.label == "D"), aux(g, "beta5"))
    assert str(parse_model(yield_string(t))) == "abs(u_{k-1})"


def test_narx_alphabet_has_no_noise():
    assert "e" not in builtin_grammar("narx").terminals
    assert "e" in builtin_grammar("narmax").terminals


def test_unknown_grammar():
    with pytest.raises(UnknownGrammar):
        builtin_grammar("nope")


@pytest.mark.parametrize("name", BUILTIN_GRAMMARS)
def test_builtin_text_round_trip(name):
    g = builtin_grammar(name)
    again = parse_grammar(g.to_text(), name=name)
    assert again.to_text() == g.to_text()


def test_sexpr_round_trip_keeps_yield(rng):
    g = builtin_grammar("full")
    for n in (0, 3, 10):
        tree = check_genotype(g, random_genotype(g, n, rng))
        again = parse_tree(to_sexpr(tree.root), g.non_terminals, g.terminals)
        assert yield_string(again) == yield_string(tree)


@pytest.mark.parametrize("name", BUILTIN_GRAMMARS)
def test_random_derivations_valid(name, rng):
    g = builtin_grammar(name)
    for i in range(300):
        geno = random_genotype(g, i % 20, rng)
        check_genotype(g, geno)
        parse_model(tokens(g, geno))
