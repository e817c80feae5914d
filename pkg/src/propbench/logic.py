"""Propositional formulas over four connectives, plus a truth-table oracle.

The statement vocabulary is deliberately small: atoms, negation, conditional,
and disjunction.  There is no conjunction constructor; premise sets are passed
around as lists instead.  Everything is immutable and every operation is pure,
so values can be shared freely across threads and processes.

Symbolic notation (used in fixtures, metadata, and debug output)::

    formula  := operand (("->" | "|") operand)?
    operand  := "~" operand | name | "(" formula ")"

Binary connectives are fully parenthesized except at the top level;
``render_symbolic`` emits exactly that canonical form.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterable, Literal, Union

DEFAULT_ATOM_CAP = 20


class FormulaSyntaxError(ValueError):
    """Malformed symbolic notation; ``offset`` is the failing position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class AtomCapExceeded(RuntimeError):
    """Truth-table oracle refused a query with too many distinct atoms.

    In default configurations this signals a generator bug: the dataset
    pipeline never produces formula sets anywhere near the cap.
    """

    def __init__(self, count: int, cap: int):
        super().__init__(f"{count} distinct atoms exceeds the oracle cap of {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class Atom:
    """Propositional variable. Identity is the integer id; the alias is
    display-only and excluded from equality and hashing."""

    id: int
    alias: str = field(default="", compare=False)

    @property
    def name(self) -> str:
        return self.alias or canonical_atom_name(self.id)


@dataclass(frozen=True)
class Negation:
    inner: "Formula"


@dataclass(frozen=True)
class Conditional:
    antecedent: "Formula"
    consequent: "Formula"


@dataclass(frozen=True)
class Disjunction:
    left: "Formula"
    right: "Formula"


Formula = Union[Atom, Negation, Conditional, Disjunction]

# Map from premises/statement to the oracle's three-way verdict.
ENTAILED: Literal["entailed"] = "entailed"
CONTRADICTED: Literal["contradicted"] = "contradicted"
INDEPENDENT: Literal["independent"] = "independent"
Verdict = Literal["entailed", "contradicted", "independent"]


def canonical_atom_name(atom_id: int) -> str:
    """Allocator naming scheme: a..z, then a1..z1, a2..z2, ...

    The scheme is invertible (see ``_name_to_id``) so rendering and
    re-parsing a generated formula preserves atom identity.
    """
    if atom_id < 0:
        raise ValueError(f"no canonical name for negative atom id {atom_id}")
    letter = chr(ord("a") + atom_id % 26)
    block = atom_id // 26
    return letter if block == 0 else f"{letter}{block}"


_CANONICAL_NAME_RE = re.compile(r"([a-z])([1-9][0-9]*)?\Z")


def _name_to_id(name: str) -> int:
    """Stable atom id for a symbolic name.

    Canonical allocator names invert exactly; anything else gets a hash-based
    id with a high bit set so it can never collide with allocator output.
    """
    m = _CANONICAL_NAME_RE.match(name)
    if m:
        return (ord(m.group(1)) - ord("a")) + 26 * int(m.group(2) or 0)
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") | (1 << 62)


class AtomAllocator:
    """Hands out fresh atoms 0, 1, 2, ... with canonical aliases."""

    def __init__(self, start: int = 0):
        self._next = start
        self._issued: list[Atom] = []

    def fresh(self) -> Atom:
        atom = Atom(self._next, canonical_atom_name(self._next))
        self._next += 1
        self._issued.append(atom)
        return atom

    @property
    def issued(self) -> tuple[Atom, ...]:
        return tuple(self._issued)

    def __len__(self) -> int:
        return len(self._issued)


# ---------------------------------------------------------------------------
# Parsing and printing

_TOKEN_RE = re.compile(r"[ \t]+|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>->|~|\||\(|\))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "name":
            tokens.append(("name", m.group(), pos))
        elif m.lastgroup == "op":
            tokens.append((m.group(), m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _offset(self) -> int:
        tok = self._peek()
        return tok[2] if tok else len(self.text)

    def _expect(self, kind: str) -> None:
        tok = self._peek()
        if tok is None or tok[0] != kind:
            raise FormulaSyntaxError(f"expected {kind!r}", self._offset())
        self.pos += 1

    def formula(self) -> Formula:
        left = self.operand()
        tok = self._peek()
        if tok and tok[0] in ("->", "|"):
            self.pos += 1
            right = self.operand()
            return Conditional(left, right) if tok[0] == "->" else Disjunction(left, right)
        return left

    def operand(self) -> Formula:
        tok = self._peek()
        if tok is None:
            raise FormulaSyntaxError("expected formula", self._offset())
        kind, text, _ = tok
        if kind == "~":
            self.pos += 1
            return Negation(self.operand())
        if kind == "name":
            self.pos += 1
            return Atom(_name_to_id(text), text)
        if kind == "(":
            self.pos += 1
            inner = self.formula()
            self._expect(")")
            return inner
        raise FormulaSyntaxError(f"unexpected token {text!r}", self._offset())


def parse_formula(text: str) -> Formula:
    parser = _Parser(text)
    formula = parser.formula()
    tok = parser._peek()
    if tok is not None:
        raise FormulaSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
    return formula


def render_symbolic(f: Formula) -> str:
    """Canonical symbolic form; inverse of ``parse_formula`` on ASTs."""
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Negation):
        return "~" + _render_operand(f.inner)
    if isinstance(f, Conditional):
        return f"{_render_operand(f.antecedent)} -> {_render_operand(f.consequent)}"
    return f"{_render_operand(f.left)} | {_render_operand(f.right)}"


def _render_operand(f: Formula) -> str:
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Negation):
        return "~" + _render_operand(f.inner)
    return "(" + render_symbolic(f) + ")"


# ---------------------------------------------------------------------------
# Semantics

Assignment = dict[int, bool]


def atoms(f: Formula) -> set[int]:
    if isinstance(f, Atom):
        return {f.id}
    if isinstance(f, Negation):
        return atoms(f.inner)
    if isinstance(f, Conditional):
        return atoms(f.antecedent) | atoms(f.consequent)
    return atoms(f.left) | atoms(f.right)


def atoms_of(formulas: Iterable[Formula]) -> set[int]:
    out: set[int] = set()
    for f in formulas:
        out |= atoms(f)
    return out


def evaluate(f: Formula, assignment: Assignment) -> bool:
    """Truth value under a total assignment (KeyError on missing atoms)."""
    if isinstance(f, Atom):
        return assignment[f.id]
    if isinstance(f, Negation):
        return not evaluate(f.inner, assignment)
    if isinstance(f, Conditional):
        return (not evaluate(f.antecedent, assignment)) or evaluate(f.consequent, assignment)
    return evaluate(f.left, assignment) or evaluate(f.right, assignment)


def _atom_column(position: int, n_atoms: int) -> int:
    """Truth column for one atom across all 2^n assignments, packed into an int.

    Bit j of the result is the atom's value in assignment j, where assignment
    j sets the atom at ``position`` true iff bit ``position`` of j is set.
    Built by repeated doubling, so constructing a column costs O(n) bigint ops
    rather than one op per assignment.
    """
    half = 1 << position
    column = ((1 << half) - 1) << half  # one period: low half 0s, high half 1s
    size = 1 << (position + 1)
    total = 1 << n_atoms
    while size < total:
        column |= column << size
        size <<= 1
    return column


def _truth_vector(f: Formula, columns: dict[int, int], full: int) -> int:
    if isinstance(f, Atom):
        return columns[f.id]
    if isinstance(f, Negation):
        return full ^ _truth_vector(f.inner, columns, full)
    if isinstance(f, Conditional):
        a = _truth_vector(f.antecedent, columns, full)
        c = _truth_vector(f.consequent, columns, full)
        return (full ^ a) | c
    return _truth_vector(f.left, columns, full) | _truth_vector(f.right, columns, full)


def _premise_vector(
    premises: list[Formula], extra: Formula, atom_cap: int
) -> tuple[int, int, dict[int, int]]:
    ids = sorted(atoms_of(premises) | atoms(extra))
    if len(ids) > atom_cap:
        raise AtomCapExceeded(len(ids), atom_cap)
    full = (1 << (1 << len(ids))) - 1
    columns = {atom_id: _atom_column(k, len(ids)) for k, atom_id in enumerate(ids)}
    vec = full
    for p in premises:
        vec &= _truth_vector(p, columns, full)
    return vec, full, columns


def entails(
    premises: list[Formula], conclusion: Formula, *, atom_cap: int = DEFAULT_ATOM_CAP
) -> bool:
    """Semantic entailment by exhaustive enumeration of all assignments.

    True iff every assignment satisfying all premises satisfies the
    conclusion.  The 2^n assignments are evaluated in bulk: each subformula
    maps to a 2^n-bit integer holding its truth value in every assignment.
    """
    prem, full, columns = _premise_vector(premises, conclusion, atom_cap)
    return prem & (full ^ _truth_vector(conclusion, columns, full)) == 0


def consistent_with(
    premises: list[Formula], statement: Formula, *, atom_cap: int = DEFAULT_ATOM_CAP
) -> Verdict:
    """Three-way verdict of a statement against a premise set.

    ``entailed`` iff premises entail the statement, ``contradicted`` iff they
    entail its negation, ``independent`` otherwise.  An inconsistent premise
    set entails everything, so the entailed branch wins (ex falso).
    """
    prem, full, columns = _premise_vector(premises, statement, atom_cap)
    stmt = _truth_vector(statement, columns, full)
    if prem & (full ^ stmt) == 0:
        return ENTAILED
    if prem & stmt == 0:
        return CONTRADICTED
    return INDEPENDENT
