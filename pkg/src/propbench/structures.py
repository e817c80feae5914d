"""Depth-targeted construction of argument structures.

A structure is a tree of inference steps: a root step concludes the final
conclusion, and premises may themselves be concluded by further steps.  The
builder works backward from a random conclusion, and at each level converts
one premise of the newest step into a subconclusion until the target depth is
reached.  Optional branching additionally expands side premises with smaller
depth budgets, which never changes the measured depth.

Expansion only ever targets premises whose rendering nests at most one
template deep; that keeps every premise within the two nested template
applications the surface realizer is designed for.
"""

from __future__ import annotations

from dataclasses import dataclass

from .forms import ArgumentForm, InferenceStep, forms_concluding, instantiate_for_conclusion, validate_step
from .logic import Atom, AtomAllocator, Conditional, Disjunction, Formula, Negation
from .rng import Stream

MAX_DEPTH = 10
DEFAULT_ROOT_SHAPES = ("atom", "negation")

# Fresh atoms a branching expansion may still allocate before it is skipped;
# keeps worst-case structures inside the oracle's default atom cap.
_BRANCH_ATOM_BUDGET = 18


class StructureError(RuntimeError):
    """Internal invariant violated while building a structure."""


@dataclass(frozen=True, eq=False)
class ArgumentStructure:
    """Tree of inference steps rooted at ``final_conclusion``.

    ``support`` maps every derived formula (the final conclusion and each
    expanded premise) to the step that concludes it.  ``leaf_premises`` are
    the premises concluded by no step, in derivation order.
    """

    final_conclusion: Formula
    steps: tuple[InferenceStep, ...]
    support: dict[Formula, InferenceStep]
    leaf_premises: tuple[Formula, ...]

    def forms_used(self) -> tuple[str, ...]:
        return tuple(step.form.value for step in self.steps)

    @property
    def root_form(self) -> ArgumentForm:
        return self.support[self.final_conclusion].form


def template_nesting(f: Formula) -> int:
    """Number of nested surface templates a formula's rendering needs."""
    if isinstance(f, Atom):
        return 0
    if isinstance(f, Negation):
        return 1 + template_nesting(f.inner)
    if isinstance(f, Conditional):
        return 1 + max(template_nesting(f.antecedent), template_nesting(f.consequent))
    return 1 + max(template_nesting(f.left), template_nesting(f.right))


def _make_root(shape: str, allocator: AtomAllocator) -> Formula:
    if shape == "atom":
        return allocator.fresh()
    if shape == "negation":
        return Negation(allocator.fresh())
    if shape == "conditional":
        return Conditional(allocator.fresh(), allocator.fresh())
    if shape == "disjunction":
        return Disjunction(allocator.fresh(), allocator.fresh())
    raise ValueError(f"unknown root shape {shape!r}")


def generate_structure(
    depth: int,
    rng: Stream,
    *,
    allocator: AtomAllocator | None = None,
    root_shapes: tuple[str, ...] = DEFAULT_ROOT_SHAPES,
    branching: bool = False,
    max_depth: int = MAX_DEPTH,
) -> ArgumentStructure:
    """Build a structure whose measured depth is exactly ``depth``."""
    if not 1 <= depth <= max_depth:
        raise ValueError(f"depth must be in 1..{max_depth}, got {depth}")
    allocator = allocator if allocator is not None else AtomAllocator()
    root = _make_root(rng.choice(root_shapes), allocator)

    steps: list[InferenceStep] = []
    support: dict[Formula, InferenceStep] = {}

    def expand(target: Formula, budget: int) -> None:
        form = rng.choice(forms_concluding(target))
        step = instantiate_for_conclusion(form, target, allocator)
        if not validate_step(step):
            raise StructureError(f"generated step failed validation: {step}")
        if target in support:
            raise StructureError(f"formula concluded twice: {target}")
        steps.append(step)
        support[target] = step
        if budget == 1:
            return
        candidates = [
            p
            for p in step.premises
            if template_nesting(p) <= 1 and len(forms_concluding(p)) >= 3
        ]
        if not candidates:
            raise StructureError(f"no expandable premise in {step}")
        main = rng.choice(candidates)
        expand(main, budget - 1)
        if branching:
            for premise in candidates:
                if premise == main or premise in support:
                    continue
                if len(allocator) >= _BRANCH_ATOM_BUDGET:
                    continue
                if rng.random() < 0.25:
                    expand(premise, 1 + rng.randrange(budget - 1))

    expand(root, depth)
    leaves = tuple(
        p for step in steps for p in step.premises if p not in support
    )
    return ArgumentStructure(root, tuple(steps), support, leaves)


def measure_depth(structure: ArgumentStructure) -> int:
    """Longest chain of steps from any leaf premise to the final conclusion."""

    def step_depth(step: InferenceStep) -> int:
        deepest = 0
        for premise in step.premises:
            child = structure.support.get(premise)
            if child is not None:
                deepest = max(deepest, step_depth(child))
        return 1 + deepest

    return step_depth(structure.support[structure.final_conclusion])


def paragraph_premises(structure: ArgumentStructure, rng: Stream, *, shuffle: bool = True) -> list[Formula]:
    """Leaf premises in presentation order.

    Subconclusions and the final conclusion are excluded: the solver has to
    re-derive them.  Order is a seeded shuffle unless ``shuffle`` is off, in
    which case derivation order is kept.
    """
    premises = list(structure.leaf_premises)
    if shuffle:
        rng.shuffle(premises)
    return premises
