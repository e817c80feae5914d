"""Natural-language realization of formulas, plus corpus complexity metrics.

Formulas are rendered through expression templates (a versioned inventory per
logical form) with atoms replaced by simple real-world sentences drawn from a
sentence bank.  The bank is filtered down to short declarative propositions so
that logical connectives only ever come from the templates, never from the
bank text itself.
"""

from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass
from importlib.resources import files

from .logic import Atom, Conditional, Disjunction, Formula, Negation
from .rng import Stream


class TemplateError(ValueError):
    """Template inventory violates its shape contract."""


class BankError(ValueError):
    """Sentence-bank file missing, malformed, or unusable."""


class BankExhausted(RuntimeError):
    """No unused bank sentence left to draw."""


class UnboundAtom(KeyError):
    """Formula mentions an atom with no bound sentence."""


class EmptyCorpus(ValueError):
    """Readability metrics need at least one word and one sentence."""


# Inventory sizes of the template classes; validated on load.
TEMPLATE_COUNTS = {"basic": 16, "negation": 15, "conditional": 11, "disjunction": 8}

# Bank simplicity filter: short declarative sentences only, with no tokens
# that would smuggle in a connective.
MIN_BANK_WORDS = 3
MAX_BANK_WORDS = 20
BANNED_BANK_WORDS = frozenset({"if", "then", "or", "either", "unless", "not"})

_WORD_RE = re.compile(r"[A-Za-z]+")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")


# ---------------------------------------------------------------------------
# Templates

@dataclass(frozen=True)
class TemplateSet:
    """Expression templates per logical form, with the source checksum."""

    basic: tuple[str, ...]
    negation: tuple[str, ...]
    conditional: tuple[str, ...]
    disjunction: tuple[str, ...]
    checksum: str

    def __post_init__(self):
        for name, expected in TEMPLATE_COUNTS.items():
            group = getattr(self, name)
            if len(group) != expected:
                raise TemplateError(
                    f"{name} templates: expected {expected}, got {len(group)}"
                )
            slots = ("{x}",) if name in ("basic", "negation") else ("{x}", "{y}")
            for template in group:
                for slot in slots:
                    if template.count(slot) != 1:
                        raise TemplateError(
                            f"{name} template must contain {slot} exactly once: {template!r}"
                        )


def default_template_path():
    return files("propbench").joinpath("data/templates.txt")


def load_templates(path=None) -> TemplateSet:
    """Parse a section-structured template file (defaults to the packaged one)."""
    resource = default_template_path() if path is None else path
    raw = resource.read_bytes() if hasattr(resource, "read_bytes") else open(resource, "rb").read()
    checksum = hashlib.sha256(raw).hexdigest()
    groups: dict[str, list[str]] = {name: [] for name in TEMPLATE_COUNTS}
    current: list[str] | None = None
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1]
            if name not in groups:
                raise TemplateError(f"unknown template section {name!r} (line {lineno})")
            current = groups[name]
            continue
        if current is None:
            raise TemplateError(f"template before any section header (line {lineno})")
        current.append(line)
    return TemplateSet(
        basic=tuple(groups["basic"]),
        negation=tuple(groups["negation"]),
        conditional=tuple(groups["conditional"]),
        disjunction=tuple(groups["disjunction"]),
        checksum=checksum,
    )


# ---------------------------------------------------------------------------
# Sentence bank

@dataclass(frozen=True)
class SentenceBank:
    """Filtered, deduplicated pool of simple declarative sentences."""

    sentences: tuple[str, ...]
    sources: tuple[str, ...]
    accepted: int
    rejected: int
    checksum: str

    def __len__(self) -> int:
        return len(self.sentences)

    def draw_indices(self, rng: Stream, count: int, used: set[int]) -> list[int]:
        """Draw ``count`` distinct unused sentence indices; marks them used."""
        n = len(self.sentences)
        available = n - len(used)
        if count > available:
            raise BankExhausted(
                f"need {count} unused sentences, only {available} remain of {n}"
            )
        if count * 4 >= available:
            # Bank nearly exhausted: draw positions from the remainder list.
            remaining = [i for i in range(n) if i not in used]
            picked = [remaining.pop(rng.randrange(len(remaining))) for _ in range(count)]
        else:
            picked = []
            seen = set(used)
            while len(picked) < count:
                i = rng.randrange(n)
                if i not in seen:
                    seen.add(i)
                    picked.append(i)
        used.update(picked)
        return picked


def is_simple_sentence(text: str) -> bool:
    """Simplicity filter: 3-20 words, ASCII-printable, no connective tokens."""
    if not all(32 <= ord(c) <= 126 for c in text):
        return False
    words = [w.lower() for w in _WORD_RE.findall(text)]
    if not MIN_BANK_WORDS <= len(words) <= MAX_BANK_WORDS:
        return False
    return not any(w in BANNED_BANK_WORDS for w in words)


def _normalize_sentence(text: str) -> str:
    text = " ".join(text.split())
    if text and text[-1] not in ".!?":
        text += "."
    return text


def default_bank_path():
    return files("propbench").joinpath("data/bank_builtin.txt")


def load_sentence_bank(path, fmt: str = "plain") -> SentenceBank:
    """Load, filter, and deduplicate a sentence bank.

    ``fmt="tsv"`` expects a header row and locates the generic-sentence column
    by name (the GenericsKB layout); ``fmt="plain"`` is one sentence per line.
    """
    raw = path.read_bytes() if hasattr(path, "read_bytes") else open(path, "rb").read()
    checksum = hashlib.sha256(raw).hexdigest()
    text = raw.decode("utf-8", errors="replace")

    rows: list[tuple[str, str]] = []  # (sentence, source id)
    if fmt == "tsv":
        reader = csv.reader(text.splitlines(), delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise BankError("empty TSV bank file")
        lowered = [h.strip().lower() for h in header]
        try:
            sent_col = lowered.index("generic sentence")
        except ValueError:
            raise BankError("TSV header has no generic-sentence column")
        source_col = lowered.index("source") if "source" in lowered else None
        for lineno, row in enumerate(reader, start=2):
            if len(row) <= sent_col:
                continue
            source = row[source_col] if source_col is not None and len(row) > source_col else f"line:{lineno}"
            rows.append((row[sent_col], source))
    elif fmt == "plain":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if line.strip():
                rows.append((line, f"line:{lineno}"))
    else:
        raise ValueError(f"unknown bank format {fmt!r}")

    sentences: list[str] = []
    sources: list[str] = []
    seen: set[str] = set()
    rejected = 0
    for sentence, source in rows:
        sentence = _normalize_sentence(sentence)
        if not is_simple_sentence(sentence) or sentence in seen:
            rejected += 1
            continue
        seen.add(sentence)
        sentences.append(sentence)
        sources.append(source)
    if not sentences:
        raise BankError("no sentences left after filtering")
    return SentenceBank(
        sentences=tuple(sentences),
        sources=tuple(sources),
        accepted=len(sentences),
        rejected=rejected,
        checksum=checksum,
    )


# ---------------------------------------------------------------------------
# Realization

AtomBinding = dict[int, str]


def slot_form(sentence: str) -> str:
    """Bank sentence as it appears inside a template slot: first letter
    lowercased, terminal period stripped."""
    sentence = sentence.strip()
    if sentence.endswith("."):
        sentence = sentence[:-1]
    if sentence:
        sentence = sentence[0].lower() + sentence[1:]
    return sentence


def _atom_sentence(atom: Atom, binding: AtomBinding) -> str:
    try:
        return binding[atom.id]
    except KeyError:
        raise UnboundAtom(f"atom {atom.name} (id {atom.id}) has no bound sentence")


def _fill(template: str, values: dict[str, tuple[str, bool]]) -> str:
    """Substitute slots; compound clauses are quoted unless the template
    already quotes that slot itself."""
    out = template
    for slot, (rendered, is_compound) in values.items():
        marker = "{" + slot + "}"
        if is_compound and f"'{marker}'" not in out:
            rendered = f"'{rendered}'"
        out = out.replace(marker, rendered)
    return out


def _render(f: Formula, binding: AtomBinding, templates: TemplateSet, rng: Stream) -> str:
    """Full sentence for a compound formula (terminal period included)."""
    if isinstance(f, Negation):
        template = rng.choice(templates.negation)
        parts = {"x": _render_inner(f.inner, binding, templates, rng)}
    elif isinstance(f, Conditional):
        template = rng.choice(templates.conditional)
        parts = {
            "x": _render_inner(f.antecedent, binding, templates, rng),
            "y": _render_inner(f.consequent, binding, templates, rng),
        }
    elif isinstance(f, Disjunction):
        template = rng.choice(templates.disjunction)
        parts = {
            "x": _render_inner(f.left, binding, templates, rng),
            "y": _render_inner(f.right, binding, templates, rng),
        }
    else:
        raise TypeError(f"not a compound formula: {f}")
    return _fill(template, parts)


def _render_inner(f: Formula, binding: AtomBinding, templates: TemplateSet, rng: Stream) -> tuple[str, bool]:
    if isinstance(f, Atom):
        return slot_form(_atom_sentence(f, binding)), False
    rendered = _render(f, binding, templates, rng)
    return slot_form(rendered), True


def realize_statement(
    f: Formula, binding: AtomBinding, templates: TemplateSet, rng: Stream
) -> str:
    """Render a formula as one natural-language sentence.

    Compounds pick a seeded template of their class and render inner formulas
    first.  A standalone atom is wrapped in a basic template half the time and
    kept verbatim otherwise, so paragraphs mix framed and bare sentences.
    """
    if isinstance(f, Atom):
        sentence = _atom_sentence(f, binding)
        if rng.random() < 0.5:
            return _fill(rng.choice(templates.basic), {"x": (slot_form(sentence), False)})
        return sentence
    return _render(f, binding, templates, rng)


def realize_query(
    f: Formula, binding: AtomBinding, templates: TemplateSet, rng: Stream
) -> str:
    """Render a query statement: atoms stay verbatim, compounds use templates."""
    if isinstance(f, Atom):
        return _atom_sentence(f, binding)
    return _render(f, binding, templates, rng)


# ---------------------------------------------------------------------------
# Complexity metrics

def count_syllables(word: str) -> int:
    """Heuristic syllable count: number of maximal vowel groups (a, e, i, o,
    u, y), minus one for a terminal silent 'e' (unless the word ends in 'le'
    or 'ee'), with a floor of one."""
    w = word.lower()
    n = len(_VOWEL_GROUP_RE.findall(w))
    if n > 1 and w.endswith("e") and not (w.endswith("le") or w.endswith("ee")):
        n -= 1
    return max(1, n)


def _sentence_count(text: str) -> int:
    return sum(1 for chunk in _SENTENCE_SPLIT_RE.split(text) if chunk.strip())


def flesch_kincaid_grade(texts: list[str]) -> float:
    """Flesch-Kincaid grade level of a corpus.

    0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59, with
    words as maximal ASCII-letter runs, sentences split on runs of ``.!?``,
    and syllables from ``count_syllables``.
    """
    words = 0
    sentences = 0
    syllables = 0
    for text in texts:
        tokens = _WORD_RE.findall(text)
        words += len(tokens)
        syllables += sum(count_syllables(t) for t in tokens)
        sentences += _sentence_count(text)
    if words == 0 or sentences == 0:
        raise EmptyCorpus("readability grade needs a non-empty corpus")
    return 0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59


def vocabulary_size(texts: list[str]) -> int:
    """Number of distinct lowercased alphabetic tokens across the corpus."""
    vocab: set[str] = set()
    for text in texts:
        vocab.update(t.lower() for t in _WORD_RE.findall(text))
    return len(vocab)
