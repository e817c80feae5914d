"""The seven propositional argument-form schemas and backward instantiation.

Each schema is a list of premise templates and a conclusion template over the
metavariables p, q, r, s.  Generation works backward: given a target
conclusion, a schema is instantiated so that its conclusion equals the target
and every unbound metavariable is filled with a fresh atom.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .logic import (
    Atom,
    AtomAllocator,
    Conditional,
    Disjunction,
    Formula,
    Negation,
    entails,
)


class ShapeMismatch(ValueError):
    """Target conclusion does not unify with the form's conclusion shape."""


class ArgumentForm(Enum):
    MODUS_PONENS = "modus_ponens"
    MODUS_TOLLENS = "modus_tollens"
    HYPOTHETICAL_SYLLOGISM = "hypothetical_syllogism"
    DISJUNCTIVE_SYLLOGISM = "disjunctive_syllogism"
    REDUCTIO_AD_ABSURDUM = "reductio_ad_absurdum"
    CONSTRUCTIVE_DILEMMA = "constructive_dilemma"
    DISJUNCTION_ELIMINATION = "disjunction_elimination"


@dataclass(frozen=True)
class InferenceStep:
    """One applied argument form: concrete premises and their conclusion."""

    form: ArgumentForm
    premises: tuple[Formula, ...]
    conclusion: Formula


# Metavariables use negative ids so they can never collide with real atoms.
_P = Atom(-1, "p")
_Q = Atom(-2, "q")
_R = Atom(-3, "r")
_S = Atom(-4, "s")

_SCHEMAS: dict[ArgumentForm, tuple[tuple[Formula, ...], Formula]] = {
    ArgumentForm.MODUS_PONENS: ((Conditional(_P, _Q), _P), _Q),
    ArgumentForm.MODUS_TOLLENS: ((Conditional(_P, _Q), Negation(_Q)), Negation(_P)),
    ArgumentForm.HYPOTHETICAL_SYLLOGISM: (
        (Conditional(_P, _Q), Conditional(_Q, _R)),
        Conditional(_P, _R),
    ),
    ArgumentForm.DISJUNCTIVE_SYLLOGISM: ((Disjunction(_P, _Q), Negation(_P)), _Q),
    ArgumentForm.REDUCTIO_AD_ABSURDUM: (
        (Conditional(_P, _Q), Conditional(_P, Negation(_Q))),
        Negation(_P),
    ),
    ArgumentForm.CONSTRUCTIVE_DILEMMA: (
        (Disjunction(_P, _Q), Conditional(_P, _R), Conditional(_Q, _S)),
        Disjunction(_R, _S),
    ),
    ArgumentForm.DISJUNCTION_ELIMINATION: (
        (Disjunction(_P, _Q), Conditional(_P, _R), Conditional(_Q, _R)),
        _R,
    ),
}

# Conclusion shape each form can produce.  Forms whose conclusion template is
# a bare metavariable accept any target; the others require the matching
# constructor.  Modus tollens and reductio are offered only for targets that
# are already negations, which keeps generated conclusions free of ~~x.
ANY_SHAPE = "any"
NEGATION_SHAPE = "negation"
CONDITIONAL_SHAPE = "conditional"
DISJUNCTION_SHAPE = "disjunction"

_CONCLUSION_SHAPES: dict[ArgumentForm, str] = {
    ArgumentForm.MODUS_PONENS: ANY_SHAPE,
    ArgumentForm.MODUS_TOLLENS: NEGATION_SHAPE,
    ArgumentForm.HYPOTHETICAL_SYLLOGISM: CONDITIONAL_SHAPE,
    ArgumentForm.DISJUNCTIVE_SYLLOGISM: ANY_SHAPE,
    ArgumentForm.REDUCTIO_AD_ABSURDUM: NEGATION_SHAPE,
    ArgumentForm.CONSTRUCTIVE_DILEMMA: DISJUNCTION_SHAPE,
    ArgumentForm.DISJUNCTION_ELIMINATION: ANY_SHAPE,
}

FORM_ORDER = tuple(ArgumentForm)


def conclusion_shape(form: ArgumentForm) -> str:
    return _CONCLUSION_SHAPES[form]


def shape_of(f: Formula) -> str:
    if isinstance(f, Negation):
        return NEGATION_SHAPE
    if isinstance(f, Conditional):
        return CONDITIONAL_SHAPE
    if isinstance(f, Disjunction):
        return DISJUNCTION_SHAPE
    return "atom"


def forms_concluding(target: Formula) -> tuple[ArgumentForm, ...]:
    """Forms whose conclusion can unify with the target, in enum order."""
    shape = shape_of(target)
    return tuple(
        form
        for form in FORM_ORDER
        if _CONCLUSION_SHAPES[form] in (ANY_SHAPE, shape)
    )


def schema(form: ArgumentForm) -> tuple[tuple[Formula, ...], Formula]:
    return _SCHEMAS[form]


def _unify_conclusion(form: ArgumentForm, target: Formula) -> dict[int, Formula]:
    """Bindings that make the form's conclusion template equal the target."""
    shape = _CONCLUSION_SHAPES[form]
    if shape == ANY_SHAPE:
        template = _SCHEMAS[form][1]
        assert isinstance(template, Atom)
        return {template.id: target}
    if shape == NEGATION_SHAPE:
        if not isinstance(target, Negation):
            raise ShapeMismatch(
                f"{form.value} concludes a negation, target is {shape_of(target)}"
            )
        return {_P.id: target.inner}
    if shape == CONDITIONAL_SHAPE:
        if not isinstance(target, Conditional):
            raise ShapeMismatch(
                f"{form.value} concludes a conditional, target is {shape_of(target)}"
            )
        return {_P.id: target.antecedent, _R.id: target.consequent}
    if not isinstance(target, Disjunction):
        raise ShapeMismatch(
            f"{form.value} concludes a disjunction, target is {shape_of(target)}"
        )
    return {_R.id: target.left, _S.id: target.right}


def _substitute(template: Formula, bindings: dict[int, Formula]) -> Formula:
    if isinstance(template, Atom):
        return bindings[template.id] if template.id < 0 else template
    if isinstance(template, Negation):
        return Negation(_substitute(template.inner, bindings))
    if isinstance(template, Conditional):
        return Conditional(
            _substitute(template.antecedent, bindings),
            _substitute(template.consequent, bindings),
        )
    return Disjunction(
        _substitute(template.left, bindings), _substitute(template.right, bindings)
    )


def _metavars(template: Formula) -> list[int]:
    """Metavariable ids in left-to-right first-occurrence order."""
    found: list[int] = []

    def walk(t: Formula) -> None:
        if isinstance(t, Atom):
            if t.id < 0 and t.id not in found:
                found.append(t.id)
        elif isinstance(t, Negation):
            walk(t.inner)
        elif isinstance(t, Conditional):
            walk(t.antecedent)
            walk(t.consequent)
        else:
            walk(t.left)
            walk(t.right)

    walk(template)
    return found


def instantiate_for_conclusion(
    form: ArgumentForm, target: Formula, fresh: AtomAllocator
) -> InferenceStep:
    """Build a step concluding exactly ``target``.

    Metavariables not bound by unifying the conclusion are filled with fresh
    atoms, drawn in template order so the result is deterministic for a given
    allocator state.
    """
    premises_t, conclusion_t = _SCHEMAS[form]
    bindings = _unify_conclusion(form, target)
    for template in premises_t:
        for var in _metavars(template):
            if var not in bindings:
                bindings[var] = fresh.fresh()
    premises = tuple(_substitute(t, bindings) for t in premises_t)
    return InferenceStep(form, premises, _substitute(conclusion_t, bindings))


def _match(template: Formula, actual: Formula, bindings: dict[int, Formula]) -> bool:
    if isinstance(template, Atom):
        if template.id < 0:
            bound = bindings.get(template.id)
            if bound is None:
                bindings[template.id] = actual
                return True
            return bound == actual
        return template == actual
    if isinstance(template, Negation):
        return isinstance(actual, Negation) and _match(template.inner, actual.inner, bindings)
    if isinstance(template, Conditional):
        return (
            isinstance(actual, Conditional)
            and _match(template.antecedent, actual.antecedent, bindings)
            and _match(template.consequent, actual.consequent, bindings)
        )
    return (
        isinstance(actual, Disjunction)
        and _match(template.left, actual.left, bindings)
        and _match(template.right, actual.right, bindings)
    )


def validate_step(step: InferenceStep) -> bool:
    """Check a step both syntactically and semantically.

    The premises and conclusion must match the form's templates under one
    consistent substitution, and the step must pass the truth-table oracle.
    """
    premises_t, conclusion_t = _SCHEMAS[step.form]
    if len(step.premises) != len(premises_t):
        return False
    bindings: dict[int, Formula] = {}
    for template, actual in zip(premises_t, step.premises):
        if not _match(template, actual, bindings):
            return False
    if not _match(conclusion_t, step.conclusion, bindings):
        return False
    return entails(list(step.premises), step.conclusion)
