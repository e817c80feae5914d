"""Instance assembly, labeling, balancing, splitting, and JSONL persistence.

Every instance's gold label is re-checked against the truth-table oracle at
assembly time; a mismatch is a generator bug and raises instead of being
silently relabeled.  The stored symbolic metadata lets ``verify`` repeat that
check on any file later.
"""

from __future__ import annotations

import json
import os
import subprocess
from dataclasses import dataclass, field, replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .logic import (
    Atom,
    AtomAllocator,
    Conditional,
    DEFAULT_ATOM_CAP,
    Disjunction,
    Formula,
    INDEPENDENT,
    Negation,
    Verdict,
    consistent_with,
    parse_formula,
    render_symbolic,
)
from .rng import GenSeed, Stream, derive_seed
from .structures import (
    ArgumentStructure,
    DEFAULT_ROOT_SHAPES,
    generate_structure,
    measure_depth,
    paragraph_premises,
)
from .surface import (
    AtomBinding,
    SentenceBank,
    TemplateSet,
    realize_query,
    realize_statement,
)

SCHEMA_VERSION = 1
QUESTION_TEXT = "Is the following statement true, false, or uncertain?"

TRUE = "True"
FALSE = "False"
UNCERTAIN = "Uncertain"
LABELS = (TRUE, FALSE, UNCERTAIN)

VERDICT_TO_LABEL: dict[Verdict, str] = {
    "entailed": TRUE,
    "contradicted": FALSE,
    "independent": UNCERTAIN,
}

ACCURATE = "accurate"
INACCURATE = "inaccurate"
INDETERMINATE = "indeterminate"

_SPLIT_SALT = 0x73706C6974  # "split"
SPLIT_FRACTIONS = (0.70, 0.15, 0.15)
SPLIT_NAMES = ("train", "validation", "test")


class ConsistencyError(RuntimeError):
    """Oracle verdict disagreed with the intended label: a generator bug."""


class SchemaVersionError(ValueError):
    """Stored dataset uses an unknown schema version."""


class DatasetFormatError(ValueError):
    """Stored dataset line violates the instance schema."""


@dataclass(frozen=True)
class SymbolicMeta:
    """Machine-checkable record of the instance's logical content."""

    premises: tuple[str, ...]  # leaf premises, paragraph order
    query: str
    conclusion: str
    steps: tuple[tuple[str, tuple[str, ...], str], ...]  # (form, premises, conclusion)

    def to_dict(self) -> dict:
        return {
            "premises": list(self.premises),
            "query": self.query,
            "conclusion": self.conclusion,
            "steps": [
                {"form": form, "premises": list(premises), "conclusion": conclusion}
                for form, premises, conclusion in self.steps
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "SymbolicMeta":
        return SymbolicMeta(
            premises=tuple(d["premises"]),
            query=d["query"],
            conclusion=d["conclusion"],
            steps=tuple(
                (s["form"], tuple(s["premises"]), s["conclusion"]) for s in d["steps"]
            ),
        )


@dataclass(frozen=True)
class InstanceMeta:
    depth: int
    forms: tuple[str, ...]
    root_form: str
    symbolic: SymbolicMeta
    factuality: str
    seed: int
    instance_index: int
    template_checksum: str
    bank_checksum: str
    generator: str
    schema_version: int = SCHEMA_VERSION


@dataclass(frozen=True)
class Instance:
    id: str
    paragraph: tuple[str, ...]
    question: str
    statement: str
    label: str
    meta: InstanceMeta

    def to_dict(self) -> dict:
        meta = self.meta
        return {
            "id": self.id,
            "paragraph": list(self.paragraph),
            "question": self.question,
            "statement": self.statement,
            "label": self.label,
            "meta": {
                "depth": meta.depth,
                "forms": list(meta.forms),
                "root_form": meta.root_form,
                "symbolic": meta.symbolic.to_dict(),
                "factuality": meta.factuality,
                "seed": meta.seed,
                "instance_index": meta.instance_index,
                "template_checksum": meta.template_checksum,
                "bank_checksum": meta.bank_checksum,
                "generator": meta.generator,
                "schema_version": meta.schema_version,
            },
        }

    @staticmethod
    def from_dict(d: dict, *, where: str = "") -> "Instance":
        meta = d["meta"]
        version = meta.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"{where}unsupported schema_version {version!r} (expected {SCHEMA_VERSION})"
            )
        label = d["label"]
        if label not in LABELS:
            raise DatasetFormatError(f"{where}label {label!r} is not one of {LABELS}")
        return Instance(
            id=d["id"],
            paragraph=tuple(d["paragraph"]),
            question=d["question"],
            statement=d["statement"],
            label=label,
            meta=InstanceMeta(
                depth=meta["depth"],
                forms=tuple(meta["forms"]),
                root_form=meta["root_form"],
                symbolic=SymbolicMeta.from_dict(meta["symbolic"]),
                factuality=meta["factuality"],
                seed=meta["seed"],
                instance_index=meta["instance_index"],
                template_checksum=meta["template_checksum"],
                bank_checksum=meta["bank_checksum"],
                generator=meta["generator"],
            ),
        )


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[Instance, ...]
    validation: tuple[Instance, ...]
    test: tuple[Instance, ...]

    def all_instances(self) -> tuple[Instance, ...]:
        return self.train + self.validation + self.test

    def by_name(self, name: str) -> tuple[Instance, ...]:
        return {"train": self.train, "validation": self.validation, "test": self.test}[name]


# ---------------------------------------------------------------------------
# Query construction

def strip_double_negation(f: Formula) -> Formula:
    """Collapse ~~x to x everywhere (applied to query statements only)."""
    if isinstance(f, Negation):
        inner = strip_double_negation(f.inner)
        if isinstance(inner, Negation):
            return inner.inner
        return Negation(inner)
    if isinstance(f, Atom):
        return f
    if isinstance(f, Conditional):
        return Conditional(strip_double_negation(f.antecedent), strip_double_negation(f.consequent))
    return Disjunction(strip_double_negation(f.left), strip_double_negation(f.right))


def make_query(
    structure: ArgumentStructure,
    target: str,
    bank: SentenceBank,
    rng: Stream,
    *,
    allocator: AtomAllocator,
    binding: AtomBinding,
    used_indices: set[int],
    oracle_cap: int = DEFAULT_ATOM_CAP,
) -> tuple[Formula, str]:
    """Query statement and gold label for a structure.

    True: the conclusion itself.  False: its negation, with double negation
    normalized away.  Uncertain: a fresh atom bound to an unused bank
    sentence, checked independent by the oracle.
    """
    if target == TRUE:
        return structure.final_conclusion, TRUE
    if target == FALSE:
        return strip_double_negation(Negation(structure.final_conclusion)), FALSE
    if target != UNCERTAIN:
        raise ValueError(f"unknown label target {target!r}")
    atom = allocator.fresh()
    idx = bank.draw_indices(rng, 1, used_indices)[0]
    binding[atom.id] = bank.sentences[idx]
    verdict = consistent_with(list(structure.leaf_premises), atom, atom_cap=oracle_cap)
    if verdict != INDEPENDENT:
        raise ConsistencyError(f"fresh query atom is {verdict}, expected independent")
    return atom, UNCERTAIN


def tag_factuality(query: Formula, binding: AtomBinding) -> str:
    """Real-world accuracy of the query, assuming bank sentences are true.

    A bare atom is accurate, a negated atom is inaccurate, and a disjunction
    with at least one bare-atom disjunct is accurate.  Every other shape is
    indeterminate.  ``binding`` records the assumption but does not influence
    the verdict.
    """
    if isinstance(query, Atom):
        return ACCURATE
    if isinstance(query, Negation) and isinstance(query.inner, Atom):
        return INACCURATE
    if isinstance(query, Disjunction):
        if isinstance(query.left, Atom) or isinstance(query.right, Atom):
            return ACCURATE
    return INDETERMINATE


# ---------------------------------------------------------------------------
# Assembly

_generator_version_cache: str | None = None


def generator_version() -> str:
    """Best-effort build identifier embedded in instance metadata."""
    global _generator_version_cache
    if _generator_version_cache is None:
        version = "propbench-0.1.0"
        try:
            out = subprocess.run(
                ["git", "describe", "--always", "--tags"],
                cwd=Path(__file__).resolve().parent,
                capture_output=True,
                text=True,
                timeout=5,
            )
            if out.returncode == 0 and out.stdout.strip():
                version = f"propbench-0.1.0+g{out.stdout.strip()}"
        except OSError:
            pass
        _generator_version_cache = version
    return _generator_version_cache


@dataclass(frozen=True)
class GenContext:
    """Everything one instance generation needs, minus the depth and label."""

    bank: SentenceBank
    templates: TemplateSet
    seed: int
    instance_index: int = 0
    shuffle: bool = True
    root_shapes: tuple[str, ...] = DEFAULT_ROOT_SHAPES
    branching: bool = False
    oracle_cap: int = DEFAULT_ATOM_CAP
    generator: str = field(default_factory=generator_version)


def assemble_instance(depth: int, target: str, ctx: GenContext) -> Instance:
    """Run the full pipeline for one instance and oracle-check the result."""
    rng = GenSeed(ctx.seed, ctx.instance_index).stream()
    allocator = AtomAllocator()
    structure = generate_structure(
        depth,
        rng,
        allocator=allocator,
        root_shapes=ctx.root_shapes,
        branching=ctx.branching,
    )

    used: set[int] = set()
    indices = ctx.bank.draw_indices(rng, len(allocator), used)
    binding: AtomBinding = {
        atom.id: ctx.bank.sentences[i] for atom, i in zip(allocator.issued, indices)
    }

    query, label = make_query(
        structure,
        target,
        ctx.bank,
        rng,
        allocator=allocator,
        binding=binding,
        used_indices=used,
        oracle_cap=ctx.oracle_cap,
    )

    ordered = paragraph_premises(structure, rng, shuffle=ctx.shuffle)
    paragraph = tuple(
        realize_statement(p, binding, ctx.templates, rng) for p in ordered
    )
    statement = realize_query(query, binding, ctx.templates, rng)

    verdict = consistent_with(list(structure.leaf_premises), query, atom_cap=ctx.oracle_cap)
    if VERDICT_TO_LABEL[verdict] != label:
        raise ConsistencyError(
            f"instance {ctx.instance_index}: oracle verdict {verdict} "
            f"contradicts intended label {label}"
        )

    symbolic = SymbolicMeta(
        premises=tuple(render_symbolic(p) for p in ordered),
        query=render_symbolic(query),
        conclusion=render_symbolic(structure.final_conclusion),
        steps=tuple(
            (
                step.form.value,
                tuple(render_symbolic(p) for p in step.premises),
                render_symbolic(step.conclusion),
            )
            for step in structure.steps
        ),
    )
    meta = InstanceMeta(
        depth=measure_depth(structure),
        forms=structure.forms_used(),
        root_form=structure.root_form.value,
        symbolic=symbolic,
        factuality=tag_factuality(query, binding),
        seed=ctx.seed,
        instance_index=ctx.instance_index,
        template_checksum=ctx.templates.checksum,
        bank_checksum=ctx.bank.checksum,
        generator=ctx.generator,
    )
    return Instance(
        id=f"{ctx.instance_index:06d}",
        paragraph=paragraph,
        question=QUESTION_TEXT,
        statement=statement,
        label=label,
        meta=meta,
    )


def _assemble_spec(ctx: GenContext, spec: tuple[int, int, str]) -> Instance:
    index, depth, label = spec
    return assemble_instance(depth, label, replace(ctx, instance_index=index))


# Worker-pool plumbing: the context is shipped to each worker once via the
# initializer instead of once per task.
_worker_ctx: GenContext | None = None


def _init_worker(ctx: GenContext) -> None:
    global _worker_ctx
    _worker_ctx = ctx


def _assemble_in_worker(spec: tuple[int, int, str]) -> Instance:
    assert _worker_ctx is not None
    return _assemble_spec(_worker_ctx, spec)


def plan_instances(n: int, depth_lo: int, depth_hi: int) -> list[tuple[int, int, str]]:
    """(index, depth, label) for every instance of a run.

    Counts split evenly across depths with the remainder handed out from the
    lowest depth up.  Labels rotate True/False/Uncertain within each depth,
    with the starting label rotated per depth so global shares stay balanced.
    """
    if depth_lo < 1 or depth_hi < depth_lo:
        raise ValueError(f"invalid depth range {depth_lo}..{depth_hi}")
    n_depths = depth_hi - depth_lo + 1
    if n < 3 * n_depths:
        raise ValueError(
            f"n={n} is below one instance per depth-label cell ({3 * n_depths})"
        )
    base, remainder = divmod(n, n_depths)
    specs: list[tuple[int, int, str]] = []
    index = 0
    for pos, depth in enumerate(range(depth_lo, depth_hi + 1)):
        count = base + (1 if pos < remainder else 0)
        for i in range(count):
            specs.append((index, depth, LABELS[(pos + i) % 3]))
            index += 1
    return specs


def _allocate_cell(size: int) -> tuple[int, int, int]:
    """Largest-remainder 70/15/15 allocation of one stratification cell."""
    quotas = [size * f for f in SPLIT_FRACTIONS]
    floors = [int(q) for q in quotas]
    leftover = size - sum(floors)
    order = sorted(range(3), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:leftover]:
        floors[i] += 1
    return tuple(floors)  # type: ignore[return-value]


def build_dataset(
    n: int,
    depth_lo: int,
    depth_hi: int,
    seed: int,
    *,
    bank: SentenceBank,
    templates: TemplateSet,
    shuffle: bool = True,
    root_shapes: tuple[str, ...] = DEFAULT_ROOT_SHAPES,
    branching: bool = False,
    oracle_cap: int = DEFAULT_ATOM_CAP,
    workers: int = 1,
) -> DatasetSplit:
    """Generate a balanced dataset and split it 70/15/15 by (depth, label)."""
    specs = plan_instances(n, depth_lo, depth_hi)
    ctx = GenContext(
        bank=bank,
        templates=templates,
        seed=seed,
        shuffle=shuffle,
        root_shapes=root_shapes,
        branching=branching,
        oracle_cap=oracle_cap,
    )
    if workers > 1:
        chunksize = max(1, len(specs) // (workers * 8))
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(ctx,)
        ) as pool:
            instances = list(pool.map(_assemble_in_worker, specs, chunksize=chunksize))
    else:
        instances = [_assemble_spec(ctx, spec) for spec in specs]

    cells: dict[tuple[int, str], list[Instance]] = {}
    for inst in instances:
        cells.setdefault((inst.meta.depth, inst.label), []).append(inst)

    buckets: dict[str, list[Instance]] = {name: [] for name in SPLIT_NAMES}
    cell_keys = sorted(cells, key=lambda k: (k[0], LABELS.index(k[1])))
    for ordinal, key in enumerate(cell_keys):
        members = list(cells[key])
        Stream(derive_seed(seed ^ _SPLIT_SALT, ordinal)).shuffle(members)
        n_train, n_val, n_test = _allocate_cell(len(members))
        buckets["train"].extend(members[:n_train])
        buckets["validation"].extend(members[n_train : n_train + n_val])
        buckets["test"].extend(members[n_train + n_val :])

    for name in SPLIT_NAMES:
        buckets[name].sort(key=lambda inst: inst.meta.instance_index)
    return DatasetSplit(
        train=tuple(buckets["train"]),
        validation=tuple(buckets["validation"]),
        test=tuple(buckets["test"]),
    )


# ---------------------------------------------------------------------------
# Persistence

def _dump_line(instance: Instance) -> str:
    return json.dumps(instance.to_dict(), sort_keys=True, separators=(",", ":"))


def write_instances(instances, path: Path) -> None:
    """Write one JSONL file atomically (write to temp, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(_dump_line(inst))
            f.write("\n")
    os.replace(tmp, path)


def read_instances(path: Path) -> list[Instance]:
    instances = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(f"{path}:{lineno}: invalid JSON: {e}") from e
            instances.append(Instance.from_dict(d, where=f"{path}:{lineno}: "))
    return instances


def write_dataset(split: DatasetSplit, directory: Path) -> None:
    directory = Path(directory)
    for name in SPLIT_NAMES:
        write_instances(split.by_name(name), directory / f"{name}.jsonl")


def read_dataset(directory: Path) -> DatasetSplit:
    directory = Path(directory)
    parts = {name: tuple(read_instances(directory / f"{name}.jsonl")) for name in SPLIT_NAMES}
    return DatasetSplit(train=parts["train"], validation=parts["validation"], test=parts["test"])


# ---------------------------------------------------------------------------
# Verification

def recheck_label(instance: Instance, *, oracle_cap: int = DEFAULT_ATOM_CAP) -> str:
    """Label the oracle assigns to the stored symbolic premises and query."""
    premises = [parse_formula(s) for s in instance.meta.symbolic.premises]
    query = parse_formula(instance.meta.symbolic.query)
    return VERDICT_TO_LABEL[consistent_with(premises, query, atom_cap=oracle_cap)]


def verify_labels(
    instances, *, oracle_cap: int = DEFAULT_ATOM_CAP
) -> list[tuple[str, str, str]]:
    """(id, stored label, oracle label) for every mismatching instance."""
    mismatches = []
    for inst in instances:
        actual = recheck_label(inst, oracle_cap=oracle_cap)
        if actual != inst.label:
            mismatches.append((inst.id, inst.label, actual))
    return mismatches
