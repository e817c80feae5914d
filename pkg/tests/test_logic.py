from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from propbench.logic import (
    Atom,
    AtomAllocator,
    AtomCapExceeded,
    Conditional,
    Disjunction,
    FormulaSyntaxError,
    Negation,
    atoms,
    atoms_of,
    canonical_atom_name,
    consistent_with,
    entails,
    evaluate,
    parse_formula,
    render_symbolic,
)

A, B, C, D = (parse_formula(s) for s in "abcd")
P, Q = parse_formula("p"), parse_formula("q")


def naive_entails(premises, conclusion):
    """Independent oracle: per-assignment evaluation over itertools.product."""
    ids = sorted(atoms_of(premises) | atoms(conclusion))
    for values in itertools.product((False, True), repeat=len(ids)):
        assignment = dict(zip(ids, values))
        if all(evaluate(p, assignment) for p in premises) and not evaluate(
            conclusion, assignment
        ):
            return False
    return True


# --- parsing and printing ---------------------------------------------------

def test_parse_conditional_with_negation():
    assert parse_formula("a -> ~b") == Conditional(A, Negation(B))


def test_parse_parenthesized_disjunction():
    assert parse_formula("(b | c)") == Disjunction(B, C)


def test_parse_incomplete_conditional_reports_offset():
    with pytest.raises(FormulaSyntaxError) as err:
        parse_formula("a ->")
    assert err.value.offset == 4


@pytest.mark.parametrize(
    "text,offset",
    [
        ("", 0),
        ("a b", 2),
        ("(a -> b", 7),
        ("a -> b -> c", 7),
        ("->", 0),
        ("a & b", 2),
    ],
)
def test_parse_errors_carry_offsets(text, offset):
    with pytest.raises(FormulaSyntaxError) as err:
        parse_formula(text)
    assert err.value.offset == offset


@pytest.mark.parametrize(
    "formula,expected",
    [
        (Negation(B), "~b"),
        (Conditional(P, Q), "p -> q"),
        (Disjunction(Negation(A), C), "~a | c"),
        (Conditional(A, Conditional(B, Negation(C))), "a -> (b -> ~c)"),
        (Disjunction(Disjunction(A, B), Negation(Conditional(C, D))), "(a | b) | ~(c -> d)"),
    ],
)
def test_render_symbolic(formula, expected):
    assert render_symbolic(formula) == expected


def test_render_is_canonical_form_of_parse():
    assert render_symbolic(parse_formula("((a)->( ~ b))")) == "a -> ~b"


_atoms = st.integers(min_value=0, max_value=7).map(lambda i: Atom(i, canonical_atom_name(i)))
_formulas = st.recursive(
    _atoms,
    lambda sub: st.one_of(
        sub.map(Negation),
        st.tuples(sub, sub).map(lambda t: Conditional(*t)),
        st.tuples(sub, sub).map(lambda t: Disjunction(*t)),
    ),
    max_leaves=10,
)


@given(_formulas)
def test_round_trip_parse_render(f):
    assert parse_formula(render_symbolic(f)) == f


def test_atom_equality_ignores_alias():
    assert Atom(3, "x") == Atom(3, "y")
    assert Atom(3) != Atom(4)


def test_allocator_names_round_trip():
    allocator = AtomAllocator()
    issued = [allocator.fresh() for _ in range(30)]
    for atom in issued:
        assert parse_formula(atom.name) == atom


# --- entailment oracle -------------------------------------------------------

def test_modus_ponens_entails():
    assert entails([Conditional(P, Q), P], Q)


def test_affirming_the_consequent_rejected():
    # witness: p=False, q=True satisfies both premises but not the conclusion
    witness = {P.id: False, Q.id: True}
    assert evaluate(Conditional(P, Q), witness)
    assert evaluate(Q, witness)
    assert not evaluate(P, witness)
    assert not entails([Conditional(P, Q), Q], P)


def test_excluded_middle_is_tautology():
    assert entails([], Disjunction(P, Negation(P)))


def test_oracle_cap_exceeded_reports_count():
    premises = [Atom(i) for i in range(21)]
    with pytest.raises(AtomCapExceeded) as err:
        entails(premises, Atom(0))
    assert err.value.count == 21
    assert err.value.cap == 20


def test_oracle_cap_is_configurable():
    premises = [Atom(i) for i in range(21)]
    assert entails(premises, Atom(0), atom_cap=21)


@given(
    st.lists(_formulas, max_size=4),
    _formulas,
)
@settings(max_examples=150)
def test_oracle_agrees_with_naive_enumeration(premises, conclusion):
    assert entails(premises, conclusion) == naive_entails(premises, conclusion)


@given(st.lists(_formulas, max_size=3), _formulas, _formulas)
@settings(max_examples=80)
def test_entailment_is_monotone(premises, conclusion, extra):
    if entails(premises, conclusion):
        assert entails(premises + [extra], conclusion)


# --- consistent_with ---------------------------------------------------------

def test_verdict_entailed():
    assert consistent_with([Disjunction(B, C), Negation(B)], C) == "entailed"


def test_verdict_contradicted():
    assert consistent_with([Disjunction(B, C), Negation(B)], Negation(C)) == "contradicted"


def test_verdict_independent_for_fresh_atom():
    assert consistent_with([Disjunction(B, C), Negation(B)], D) == "independent"


def test_inconsistent_premises_entail_everything():
    for statement in (Q, Negation(Q), Disjunction(Q, B)):
        assert consistent_with([P, Negation(P)], statement) == "entailed"


@given(st.lists(_formulas, max_size=4), _formulas)
@settings(max_examples=100)
def test_entailed_and_contradicted_are_exclusive(premises, statement):
    verdict = consistent_with(premises, statement)
    both = entails(premises, statement) and entails(premises, Negation(statement))
    if both:
        assert verdict == "entailed"  # ex falso: entailed wins
    else:
        assert verdict in ("entailed", "contradicted", "independent")
        assert (verdict == "entailed") == entails(premises, statement)
        assert (verdict == "contradicted") == (
            not entails(premises, statement) and entails(premises, Negation(statement))
        )
