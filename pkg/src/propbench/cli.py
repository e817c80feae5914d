"""Command-line entry point: generate, verify, inspect, prompt, and score.

Every subcommand except ``eval`` is deterministic given its arguments and
input files.  Output files are written atomically (temp file then rename).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from collections import Counter
from pathlib import Path

from . import dataset as ds
from . import evaluation as ev
from .logic import DEFAULT_ATOM_CAP
from .rng import Stream, derive_seed
from .structures import DEFAULT_ROOT_SHAPES
from .surface import (
    BankError,
    TemplateError,
    default_bank_path,
    flesch_kincaid_grade,
    load_sentence_bank,
    load_templates,
    vocabulary_size,
)


def _parse_depths(text: str) -> tuple[int, int]:
    """Inclusive depth range, ``lo:hi`` or a single depth."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return lo, hi


def _bank_format(path: Path, explicit: str) -> str:
    if explicit != "auto":
        return explicit
    return "tsv" if str(path).endswith((".tsv", ".tsv.gz")) else "plain"


def _load_bank(args):
    if args.bank is None:
        return load_sentence_bank(default_bank_path(), "plain")
    path = Path(args.bank)
    return load_sentence_bank(path, _bank_format(path, args.bank_format))


def _write_text_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_jsonl_atomic(path: Path, objs) -> None:
    _write_text_atomic(
        path, "".join(json.dumps(o, sort_keys=True, separators=(",", ":")) + "\n" for o in objs)
    )


# ---------------------------------------------------------------------------
# Subcommands

def cmd_gen(args) -> int:
    lo, hi = args.depths
    bank = _load_bank(args)
    templates = load_templates(args.templates)
    config = {
        "subcommand": "gen",
        "n": args.n,
        "depths": f"{lo}:{hi}",
        "seed": args.seed,
        "bank": str(args.bank) if args.bank else "builtin",
        "bank_checksum": bank.checksum,
        "bank_sentences": len(bank),
        "template_checksum": templates.checksum,
        "shuffle": not args.no_shuffle,
        "root_shapes": list(args.root_shapes),
        "branching": args.branching,
        "oracle_cap": args.oracle_cap,
        "workers": args.workers,
        "out": str(args.out),
        "schema_version": ds.SCHEMA_VERSION,
        "generator": ds.generator_version(),
    }
    print(json.dumps(config, indent=2, sort_keys=True))
    split = ds.build_dataset(
        args.n,
        lo,
        hi,
        args.seed,
        bank=bank,
        templates=templates,
        shuffle=not args.no_shuffle,
        root_shapes=args.root_shapes,
        branching=args.branching,
        oracle_cap=args.oracle_cap,
        workers=args.workers,
    )
    out = Path(args.out)
    ds.write_dataset(split, out)
    _write_text_atomic(out / "manifest.json", json.dumps(config, indent=2, sort_keys=True) + "\n")
    print(
        f"wrote {len(split.train)} train / {len(split.validation)} validation / "
        f"{len(split.test)} test instances to {out}"
    )
    return 0


def cmd_verify(args) -> int:
    status = 0
    for path in args.files:
        instances = ds.read_instances(Path(path))
        mismatches = ds.verify_labels(instances, oracle_cap=args.oracle_cap)
        ok = len(instances) - len(mismatches)
        print(f"{path}: {ok}/{len(instances)} labels verified")
        if mismatches:
            inst_id, stored, actual = mismatches[0]
            print(
                f"{path}: instance {inst_id} stored label {stored}, oracle says {actual}",
                file=sys.stderr,
            )
            status = 1
    return status


def cmd_stats(args) -> int:
    instances = []
    for path in args.files:
        instances.extend(ds.read_instances(Path(path)))
    if not instances:
        print("error: no instances", file=sys.stderr)
        return 1
    texts = [p for inst in instances for p in inst.paragraph]
    texts.extend(inst.statement for inst in instances)
    depths = Counter(inst.meta.depth for inst in instances)
    labels = Counter(inst.label for inst in instances)
    forms = Counter(form for inst in instances for form in inst.meta.forms)
    stats = {
        "instances": len(instances),
        "flesch_kincaid_grade": round(flesch_kincaid_grade(texts), 2),
        "vocabulary_size": vocabulary_size(texts),
        "depth_histogram": {str(d): depths[d] for d in sorted(depths)},
        "label_histogram": {label: labels[label] for label in ds.LABELS if label in labels},
        "form_histogram": dict(sorted(forms.items())),
    }
    print(json.dumps(stats, indent=2))
    return 0


def _build_prompts(args, instances) -> list[tuple[str, str]]:
    spec = ev.PromptSpec(mode=args.mode, shots=args.shots)
    train = None
    if args.mode == ev.FEW_SHOT:
        if not args.train:
            raise ev.PromptError("few_shot mode needs --train for exemplars")
        train = ds.read_instances(Path(args.train))
    prompts = []
    for position, inst in enumerate(instances):
        if spec.mode == ev.PK_TEST:
            text = ev.build_pk_prompt(inst, spec)
        elif spec.mode == ev.FEW_SHOT:
            rng = Stream(derive_seed(args.prompt_seed, position))
            exemplars = ev.select_exemplars(train, spec.shots, rng, exclude_id=inst.id)
            text = ev.build_task_prompt(inst, spec, exemplars)
        else:
            text = ev.build_task_prompt(inst, spec)
        prompts.append((inst.id, text))
    return prompts


def cmd_prompts(args) -> int:
    instances = ds.read_instances(Path(args.data))
    prompts = _build_prompts(args, instances)
    _write_jsonl_atomic(
        Path(args.out),
        (
            {"id": inst_id, "prompt": text, "prompt_sha256": ev.prompt_checksum(text)}
            for inst_id, text in prompts
        ),
    )
    print(f"wrote {len(prompts)} prompts to {args.out}")
    return 0


def cmd_eval(args) -> int:
    instances = ds.read_instances(Path(args.data))
    prompts = _build_prompts(args, instances)
    endpoint = ev.ModelEndpoint(
        base_url=args.endpoint,
        model=args.model,
        token_env=args.token_env,
        temperature=args.temperature,
        top_p=args.top_p,
        max_parallel=args.parallel,
        max_retries=args.retries,
        timeout=args.timeout,
    )
    records = ev.query_model(endpoint, prompts)
    _write_jsonl_atomic(Path(args.out), (r.to_dict() for r in records))
    failures = sum(1 for r in records if r.failure)
    print(f"wrote {len(records)} records to {args.out} ({failures} failed requests)")
    return 0


def _read_records(path: Path) -> list[ev.EvalRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(ev.EvalRecord.from_dict(json.loads(line)))
    return records


def _score_command(args, mode: str) -> int:
    records = _read_records(Path(args.records))
    gold = ds.read_instances(Path(args.data))
    report = ev.score(records, gold, mode=mode)
    print(json.dumps(report.to_dict(), indent=2))
    if args.out:
        _write_text_atomic(Path(args.out), json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    if args.csv:
        rows = report.to_csv_rows()
        path = Path(args.csv)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerows(rows)
        os.replace(tmp, path)
    return 0


def cmd_score(args) -> int:
    return _score_command(args, "task")


def cmd_pk_test(args) -> int:
    return _score_command(args, "pk")


# ---------------------------------------------------------------------------
# Parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="propbench",
        description="Generate, verify, and score propositional deduction benchmarks.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    gen = sub.add_parser("gen", help="generate a dataset split")
    gen.add_argument("--n", type=int, required=True, help="total instance count")
    gen.add_argument("--depths", type=_parse_depths, default=(1, 7), help="inclusive range lo:hi")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--bank", default=None, help="sentence bank file (default: builtin bank)")
    gen.add_argument("--bank-format", choices=("auto", "tsv", "plain"), default="auto")
    gen.add_argument("--templates", default=None, help="template file (default: packaged)")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    gen.add_argument("--no-shuffle", action="store_true", help="keep derivation order of premises")
    gen.add_argument(
        "--root-shapes",
        type=lambda s: tuple(s.split(",")),
        default=DEFAULT_ROOT_SHAPES,
        help="comma-separated conclusion shapes (atom,negation,conditional,disjunction)",
    )
    gen.add_argument("--branching", action="store_true", help="expand side premises too")
    gen.add_argument("--oracle-cap", type=int, default=DEFAULT_ATOM_CAP)
    gen.set_defaults(func=cmd_gen)

    verify = sub.add_parser("verify", help="re-check stored labels against the oracle")
    verify.add_argument("files", nargs="+")
    verify.add_argument("--oracle-cap", type=int, default=DEFAULT_ATOM_CAP)
    verify.set_defaults(func=cmd_verify)

    stats = sub.add_parser("stats", help="complexity metrics and histograms")
    stats.add_argument("files", nargs="+")
    stats.set_defaults(func=cmd_stats)

    def add_prompt_args(p):
        p.add_argument("--data", required=True, help="instances JSONL")
        p.add_argument("--mode", choices=ev.MODES, default=ev.ZERO_SHOT)
        p.add_argument("--shots", type=int, default=3)
        p.add_argument("--train", default=None, help="train split (few_shot exemplars)")
        p.add_argument("--prompt-seed", type=int, default=0)

    prompts = sub.add_parser("prompts", help="render prompt files without network access")
    add_prompt_args(prompts)
    prompts.add_argument("--out", required=True)
    prompts.set_defaults(func=cmd_prompts)

    ev_cmd = sub.add_parser("eval", help="query a chat-completion endpoint")
    add_prompt_args(ev_cmd)
    ev_cmd.add_argument("--endpoint", required=True, help="base URL of the API")
    ev_cmd.add_argument("--model", required=True)
    ev_cmd.add_argument("--token-env", default=None, help="env var holding the bearer token")
    ev_cmd.add_argument("--temperature", type=float, default=0.6)
    ev_cmd.add_argument("--top-p", type=float, default=0.9)
    ev_cmd.add_argument("--parallel", type=int, default=4)
    ev_cmd.add_argument("--retries", type=int, default=3)
    ev_cmd.add_argument("--timeout", type=float, default=60.0)
    ev_cmd.add_argument("--out", required=True)
    ev_cmd.set_defaults(func=cmd_eval)

    def add_score_args(p):
        p.add_argument("--records", required=True, help="records JSONL from eval")
        p.add_argument("--data", required=True, help="gold instances JSONL")
        p.add_argument("--out", default=None, help="write report JSON here")
        p.add_argument("--csv", default=None, help="write breakdown CSV here")

    score = sub.add_parser("score", help="score eval records against gold labels")
    add_score_args(score)
    score.set_defaults(func=cmd_score)

    pk = sub.add_parser("pk-test", help="score a prior-knowledge probe run")
    add_score_args(pk)
    pk.set_defaults(func=cmd_pk_test)

    return parser


_DOMAIN_ERRORS = (
    BankError,
    TemplateError,
    ds.ConsistencyError,
    ds.DatasetFormatError,
    ds.SchemaVersionError,
    ev.EndpointConfigError,
    ev.PromptError,
    ev.UnmatchedRecord,
    FileNotFoundError,
    ValueError,
    OSError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())
