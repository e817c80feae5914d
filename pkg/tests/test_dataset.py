from __future__ import annotations

import json
from collections import Counter
from dataclasses import replace

import pytest

from propbench.dataset import (
    ConsistencyError,
    DatasetFormatError,
    GenContext,
    LABELS,
    QUESTION_TEXT,
    SchemaVersionError,
    assemble_instance,
    build_dataset,
    make_query,
    plan_instances,
    read_dataset,
    read_instances,
    recheck_label,
    strip_double_negation,
    tag_factuality,
    verify_labels,
    write_dataset,
)
from propbench.logic import (
    Atom,
    AtomAllocator,
    Conditional,
    Disjunction,
    Negation,
    atoms_of,
    parse_formula,
)
from propbench.rng import Stream
from propbench.structures import generate_structure
from propbench.surface import BankExhausted, load_sentence_bank
import propbench.dataset as dataset_module


def _structure(seed=3, depth=2, allocator=None):
    allocator = allocator or AtomAllocator()
    return generate_structure(depth, Stream(seed), allocator=allocator), allocator


# --- query construction ---------------------------------------------------------

def test_true_query_is_the_conclusion(bank):
    structure, allocator = _structure()
    query, label = make_query(
        structure, "True", bank, Stream(0), allocator=allocator, binding={}, used_indices=set()
    )
    assert label == "True"
    assert query == structure.final_conclusion


def test_false_query_normalizes_double_negation(bank):
    # find a structure whose conclusion is a negation; its False query is the inner atom
    for seed in range(20):
        structure, allocator = _structure(seed=seed)
        if isinstance(structure.final_conclusion, Negation):
            break
    query, label = make_query(
        structure, "False", bank, Stream(0), allocator=allocator, binding={}, used_indices=set()
    )
    assert label == "False"
    assert query == structure.final_conclusion.inner


def test_false_query_on_atom_conclusion_is_its_negation(bank):
    for seed in range(20):
        structure, allocator = _structure(seed=seed)
        if isinstance(structure.final_conclusion, Atom):
            break
    query, _ = make_query(
        structure, "False", bank, Stream(0), allocator=allocator, binding={}, used_indices=set()
    )
    assert query == Negation(structure.final_conclusion)


def test_uncertain_query_is_fresh_and_unused(bank):
    structure, allocator = _structure()
    binding = {}
    used = set()
    query, label = make_query(
        structure, "Uncertain", bank, Stream(0), allocator=allocator, binding=binding, used_indices=used
    )
    assert label == "Uncertain"
    assert isinstance(query, Atom)
    assert query.id not in atoms_of(structure.leaf_premises)
    assert query.id in binding
    assert len(used) == 1


def test_strip_double_negation():
    a = Atom(0, "a")
    assert strip_double_negation(Negation(Negation(a))) == a
    assert strip_double_negation(Negation(a)) == Negation(a)
    assert strip_double_negation(
        Conditional(Negation(Negation(a)), Disjunction(a, Negation(Negation(Negation(a)))))
    ) == Conditional(a, Disjunction(a, Negation(a)))


# --- factuality tagging -----------------------------------------------------------

@pytest.mark.parametrize(
    "formula,expected",
    [
        ("a", "accurate"),
        ("~a", "inaccurate"),
        ("a -> b", "indeterminate"),
        ("a | b", "accurate"),
        ("a | ~b", "accurate"),
        ("~a | ~b", "indeterminate"),
        ("~(a | b)", "indeterminate"),
        ("~(a -> b)", "indeterminate"),
    ],
)
def test_tag_factuality(formula, expected):
    assert tag_factuality(parse_formula(formula), {}) == expected


# --- assembly ---------------------------------------------------------------------

def test_depth2_false_instance_has_three_premises(bank, templates):
    ctx = GenContext(bank=bank, templates=templates, seed=0, instance_index=0)
    inst = assemble_instance(2, "False", ctx)
    assert inst.label == "False"
    assert len(inst.paragraph) == 3
    assert inst.question == QUESTION_TEXT
    assert inst.meta.depth == 2
    assert inst.meta.symbolic.query == "a"
    assert inst.meta.symbolic.conclusion == "~a"


def test_depth1_instance_premise_count_tracks_root_form(bank, templates):
    seen = set()
    for seed in range(30):
        ctx = GenContext(bank=bank, templates=templates, seed=seed, instance_index=0)
        inst = assemble_instance(1, "True", ctx)
        expected = 3 if inst.meta.root_form in ("constructive_dilemma", "disjunction_elimination") else 2
        assert len(inst.paragraph) == expected
        seen.add(len(inst.paragraph))
        assert 2 <= len(inst.paragraph) <= 4
    assert seen == {2, 3}


def test_assembly_is_deterministic(ctx):
    a = assemble_instance(3, "Uncertain", ctx)
    b = assemble_instance(3, "Uncertain", ctx)
    assert a == b


def test_assembly_exhausts_undersized_bank(tmp_path, templates):
    path = tmp_path / "tiny.txt"
    path.write_text(
        "Dogs are mammals.\nCats have whiskers.\nBirds lay eggs.\nFish live in water.\n",
        encoding="utf-8",
    )
    tiny = load_sentence_bank(path, "plain")
    ctx = GenContext(bank=tiny, templates=templates, seed=1, instance_index=0)
    # depth 5 needs at least six distinct sentences
    with pytest.raises(BankExhausted):
        assemble_instance(5, "Uncertain", ctx)


def test_corrupted_generation_fails_hard(ctx, monkeypatch):
    def broken_make_query(structure, target, bank, rng, **kwargs):
        return structure.final_conclusion, "False"  # oracle will say True

    monkeypatch.setattr(dataset_module, "make_query", broken_make_query)
    with pytest.raises(ConsistencyError):
        assemble_instance(2, "False", ctx)


def test_uncertain_query_atom_absent_from_premises(bank, templates):
    for seed in range(10):
        ctx = GenContext(bank=bank, templates=templates, seed=seed, instance_index=1)
        inst = assemble_instance(3, "Uncertain", ctx)
        query = inst.meta.symbolic.query
        premise_atoms = atoms_of([parse_formula(s) for s in inst.meta.symbolic.premises])
        assert parse_formula(query).id not in premise_atoms


# --- planning and splitting ----------------------------------------------------------

def test_plan_7000_instances_shape():
    specs = plan_instances(7000, 1, 7)
    assert len(specs) == 7000
    per_depth = Counter(depth for _, depth, _ in specs)
    assert per_depth == {d: 1000 for d in range(1, 8)}
    for depth in range(1, 8):
        labels = Counter(label for _, d, label in specs if d == depth)
        assert sorted(labels.values()) == [333, 333, 334]
    total = Counter(label for _, _, label in specs)
    assert all(abs(total[label] - 7000 / 3) < 7000 * 0.02 for label in LABELS)


def test_plan_21_instances_one_per_cell():
    specs = plan_instances(21, 1, 7)
    cells = Counter((depth, label) for _, depth, label in specs)
    assert all(cells[(d, label)] == 1 for d in range(1, 8) for label in LABELS)


def test_plan_remainder_distributed_round_robin():
    specs = plan_instances(23, 1, 7)
    per_depth = Counter(depth for _, depth, _ in specs)
    assert per_depth == {1: 4, 2: 4, 3: 3, 4: 3, 5: 3, 6: 3, 7: 3}


def test_plan_rejects_bad_inputs():
    with pytest.raises(ValueError):
        plan_instances(100, 3, 2)
    with pytest.raises(ValueError):
        plan_instances(100, 0, 7)
    with pytest.raises(ValueError):
        plan_instances(20, 1, 7)


def test_split_proportions_and_disjointness(small_split):
    split = small_split
    assert len(split.train) == 63 and len(split.validation) == 21 and len(split.test) == 21
    ids = [inst.id for inst in split.all_instances()]
    assert len(ids) == len(set(ids))
    # stratification: each (depth, label) cell splits 3/1/1
    for part, expected in (("train", 3), ("validation", 1), ("test", 1)):
        cells = Counter((i.meta.depth, i.label) for i in split.by_name(part))
        assert all(v == expected for v in cells.values())
        assert len(cells) == 21


def test_test_split_depth_histogram_uniform(small_split):
    depths = Counter(inst.meta.depth for inst in small_split.test)
    assert max(depths.values()) - min(depths.values()) <= 1


def test_labels_balanced_within_two_points(small_split):
    for name in ("train", "validation", "test"):
        part = small_split.by_name(name)
        counts = Counter(inst.label for inst in part)
        for label in LABELS:
            share = counts[label] / len(part)
            assert abs(share - 1 / 3) <= 0.02 + 1e-9


def test_all_labels_verify(small_split):
    assert verify_labels(small_split.all_instances()) == []


def test_parallel_generation_matches_serial(bank, templates):
    kwargs = dict(bank=bank, templates=templates)
    serial = build_dataset(21, 1, 7, seed=5, workers=1, **kwargs)
    parallel = build_dataset(21, 1, 7, seed=5, workers=2, **kwargs)
    assert serial == parallel


# --- persistence ---------------------------------------------------------------------

def test_write_read_round_trip(tmp_path, small_split):
    write_dataset(small_split, tmp_path)
    loaded = read_dataset(tmp_path)
    assert loaded == small_split


def test_serialization_is_byte_identical_across_runs(tmp_path, bank, templates):
    kwargs = dict(bank=bank, templates=templates)
    a = build_dataset(21, 1, 7, seed=9, **kwargs)
    b = build_dataset(21, 1, 7, seed=9, **kwargs)
    write_dataset(a, tmp_path / "a")
    write_dataset(b, tmp_path / "b")
    for name in ("train", "validation", "test"):
        assert (tmp_path / "a" / f"{name}.jsonl").read_bytes() == (
            tmp_path / "b" / f"{name}.jsonl"
        ).read_bytes()


def test_unknown_schema_version_rejected(tmp_path, small_split):
    inst = small_split.train[0]
    d = inst.to_dict()
    d["meta"]["schema_version"] = 99
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(d) + "\n", encoding="utf-8")
    with pytest.raises(SchemaVersionError):
        read_instances(path)


def test_bad_label_rejected_with_line_number(tmp_path, small_split):
    good = small_split.train[0].to_dict()
    bad = small_split.train[1].to_dict()
    bad["label"] = "Maybe"
    path = tmp_path / "bad.jsonl"
    path.write_text(
        json.dumps(good) + "\n" + json.dumps(bad) + "\n", encoding="utf-8"
    )
    with pytest.raises(DatasetFormatError) as err:
        read_instances(path)
    assert ":2:" in str(err.value)


def test_recheck_label_detects_tampering(small_split):
    inst = small_split.test[0]
    wrong = next(l for l in LABELS if l != inst.label)
    tampered = replace(inst, label=wrong)
    assert recheck_label(tampered) == inst.label
    assert verify_labels([tampered]) == [(inst.id, wrong, inst.label)]
