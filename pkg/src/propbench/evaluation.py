"""Prompt construction, model querying, answer extraction, and scoring.

Prompts come in four modes: zero-shot, few-shot (exemplars from the train
split), chain-of-thought (three versioned worked examples), and the
prior-knowledge probe, which shows the statement with no paragraph at all.
Scoring reports accuracy overall, by reasoning depth, and by argument form
(the latter over depth-1 instances only, since deeper instances mix forms).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib.resources import files

import requests

from .dataset import Instance, LABELS
from .rng import Stream

ZERO_SHOT = "zero_shot"
FEW_SHOT = "few_shot"
CHAIN_OF_THOUGHT = "chain_of_thought"
PK_TEST = "pk_test"
MODES = (ZERO_SHOT, FEW_SHOT, CHAIN_OF_THOUGHT, PK_TEST)

UNPARSEABLE = "unparseable"

TASK_PREAMBLE = """\
You are given a paragraph of facts/premises, followed by a statement. Perform logical reasoning with propositional logic on the paragraph to determine the truth value of the statement.

Here is the list of argument forms:
- Modus Ponens
- Modus Tollens
- Hypothetical Syllogism
- Disjunctive Syllogism
- Reductio ad absurdum
- Constructive Dilemma
- Disjunction Elimination

You must answer with either one of the 3 options:
- TRUE: When the premises in the paragraph lead to the statement
- FALSE: When the premises in the paragraph directly contradict the statement
- UNCERTAIN: When the premises in the paragraph neither support nor contradict the statement

Do not use your prior knowledge; your answer must be solely determined by the information within the paragraph. Assume that all premises in the paragraph are true."""

TASK_QUESTION = "Is the statement true, false, or uncertain?"

PK_INSTRUCTIONS = """\
Instructions:
- Use the knowledge you currently have to answer as accurately as possible.
- You have 3 answer options: True, False, and Uncertain.
- There should be roughly an equal proportion of each option."""

PK_QUESTION = "Is the following statement true, false, or uncertain?"


class PromptError(ValueError):
    """Prompt construction violated its contract."""


class ExemplarOverlap(PromptError):
    """An exemplar is the instance being asked about."""


class EndpointConfigError(ValueError):
    """Endpoint is misconfigured; refused before any request is sent."""


class UnmatchedRecord(ValueError):
    """A response record has no matching gold instance."""


@dataclass(frozen=True)
class PromptSpec:
    mode: str
    shots: int = 3

    def __post_init__(self):
        if self.mode not in MODES:
            raise PromptError(f"unknown prompt mode {self.mode!r}")
        if self.mode in (FEW_SHOT, CHAIN_OF_THOUGHT) and self.shots < 1:
            raise PromptError(f"{self.mode} needs at least one exemplar")


@dataclass(frozen=True)
class ModelEndpoint:
    """Chat-completion endpoint settings. The auth token itself is read from
    the named environment variable and never stored or serialized."""

    base_url: str
    model: str
    token_env: str | None = None
    temperature: float = 0.6
    top_p: float = 0.9
    max_parallel: int = 4
    max_retries: int = 3
    timeout: float = 60.0
    retry_base_delay: float = 0.5

    def describe(self) -> dict:
        return {
            "base_url": self.base_url,
            "model": self.model,
            "token_env": self.token_env,
            "temperature": self.temperature,
            "top_p": self.top_p,
        }


@dataclass(frozen=True)
class EvalRecord:
    instance_id: str
    raw: str
    extracted: str
    latency_ms: int = 0
    retries: int = 0
    failure: str | None = None
    prompt_sha256: str = ""
    tokens: dict | None = None
    ambiguous: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.instance_id,
            "raw": self.raw,
            "extracted": self.extracted,
            "latency_ms": self.latency_ms,
            "retries": self.retries,
            "failure": self.failure,
            "prompt_sha256": self.prompt_sha256,
            "tokens": self.tokens,
            "ambiguous": self.ambiguous,
        }

    @staticmethod
    def from_dict(d: dict) -> "EvalRecord":
        return EvalRecord(
            instance_id=d["id"],
            raw=d.get("raw", ""),
            extracted=d["extracted"],
            latency_ms=d.get("latency_ms", 0),
            retries=d.get("retries", 0),
            failure=d.get("failure"),
            prompt_sha256=d.get("prompt_sha256", ""),
            tokens=d.get("tokens"),
            ambiguous=d.get("ambiguous", False),
        )


def prompt_checksum(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Prompt construction

def _paragraph_block(paragraph) -> str:
    return "Paragraph:\n" + "\n".join(f"- {p}" for p in paragraph)


def _task_block(paragraph, statement: str, answer: str | None, reasoning: str | None = None) -> str:
    lines = [
        _paragraph_block(paragraph),
        "",
        f"Question: {TASK_QUESTION}",
        f"Statement: {statement}",
    ]
    if reasoning is not None:
        lines.append(f"Reasoning: {reasoning}")
    lines.append(f"Answer: {answer}" if answer is not None else "Answer:")
    return "\n".join(lines)


_cot_cache: tuple[list[dict], str] | None = None


def load_cot_exemplars() -> tuple[list[dict], str]:
    """The versioned worked examples (one per label) and their checksum."""
    global _cot_cache
    if _cot_cache is None:
        raw = files("propbench").joinpath("data/cot_exemplars.json").read_bytes()
        _cot_cache = (json.loads(raw), hashlib.sha256(raw).hexdigest())
    return _cot_cache


def select_exemplars(
    train: list[Instance], shots: int, rng: Stream, *, exclude_id: str | None = None
) -> list[Instance]:
    """Seeded exemplar pick from the train split, stratified by label."""
    pools = {label: [t for t in train if t.label == label and t.id != exclude_id] for label in LABELS}
    picked: list[Instance] = []
    for i in range(shots):
        label = LABELS[i % 3]
        pool = pools[label] or [t for ts in pools.values() for t in ts]
        if not pool:
            raise PromptError("train split has no usable exemplars")
        choice = pool[rng.randrange(len(pool))]
        picked.append(choice)
        for candidates in pools.values():
            if choice in candidates:
                candidates.remove(choice)
    return picked


def build_task_prompt(
    inst: Instance, spec: PromptSpec, exemplars: list[Instance] | tuple = ()
) -> str:
    """Full prompt for one instance: preamble, mode-dependent exemplars, then
    the target paragraph/statement with an open answer slot."""
    if spec.mode == PK_TEST:
        raise PromptError("use build_pk_prompt for pk_test mode")
    blocks = [TASK_PREAMBLE]
    if spec.mode == FEW_SHOT:
        if len(exemplars) < spec.shots:
            raise PromptError(f"few_shot needs {spec.shots} exemplars, got {len(exemplars)}")
        for ex in exemplars[: spec.shots]:
            if ex.id == inst.id:
                raise ExemplarOverlap(f"exemplar {ex.id} is the target instance")
            blocks.append(_task_block(ex.paragraph, ex.statement, ex.label))
    elif spec.mode == CHAIN_OF_THOUGHT:
        worked, _ = load_cot_exemplars()
        for ex in worked:
            blocks.append(
                _task_block(ex["paragraph"], ex["statement"], ex["answer"], ex["reasoning"])
            )
    blocks.append(_task_block(inst.paragraph, inst.statement, None))
    return "\n\n".join(blocks)


def build_pk_prompt(inst: Instance, spec: PromptSpec) -> str:
    """Context-free probe: the statement and options, but no paragraph."""
    if spec.mode != PK_TEST:
        raise PromptError(f"pk prompt requested with mode {spec.mode!r}")
    return (
        f"{PK_INSTRUCTIONS}\n\n"
        f"Question: {PK_QUESTION}\n"
        f"Statement: {inst.statement}\n"
        f"Answer:"
    )


def build_prompt(inst: Instance, spec: PromptSpec, exemplars=()) -> str:
    if spec.mode == PK_TEST:
        return build_pk_prompt(inst, spec)
    return build_task_prompt(inst, spec, exemplars)


# ---------------------------------------------------------------------------
# Model client

def _validate_endpoint(endpoint: ModelEndpoint) -> str | None:
    if not endpoint.base_url.startswith(("http://", "https://")):
        raise EndpointConfigError(f"base_url must be http(s), got {endpoint.base_url!r}")
    if not endpoint.model:
        raise EndpointConfigError("model name is empty")
    token = None
    if endpoint.token_env:
        token = os.environ.get(endpoint.token_env)
        if not token:
            raise EndpointConfigError(
                f"auth token environment variable {endpoint.token_env} is not set"
            )
    return token


def _completions_url(base_url: str) -> str:
    base = base_url.rstrip("/")
    return base if base.endswith("/chat/completions") else f"{base}/chat/completions"


def _query_one(endpoint: ModelEndpoint, url: str, token: str | None, item: tuple[str, str]) -> EvalRecord:
    instance_id, prompt = item
    headers = {"Content-Type": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    payload = {
        "model": endpoint.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.temperature,
        "top_p": endpoint.top_p,
    }
    sha = prompt_checksum(prompt)
    start = time.monotonic()
    failure = "no attempt made"
    retries = 0
    for attempt in range(endpoint.max_retries + 1):
        if attempt:
            retries = attempt
            time.sleep(endpoint.retry_base_delay * 2 ** (attempt - 1))
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=endpoint.timeout)
        except requests.RequestException as e:
            failure = f"transport-failure: {e.__class__.__name__}"
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            failure = f"http-{resp.status_code}"
            continue
        latency = int((time.monotonic() - start) * 1000)
        if resp.status_code != 200:
            failure = f"http-{resp.status_code}"
            break
        try:
            data = resp.json()
            raw = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            failure = "malformed-response"
            break
        usage = data.get("usage")
        tokens = (
            {k: usage[k] for k in ("prompt_tokens", "completion_tokens") if k in usage}
            if isinstance(usage, dict)
            else None
        )
        return EvalRecord(
            instance_id=instance_id,
            raw=raw,
            extracted=extract_answer(raw),
            latency_ms=latency,
            retries=retries,
            prompt_sha256=sha,
            tokens=tokens,
            ambiguous=is_ambiguous(raw),
        )
    latency = int((time.monotonic() - start) * 1000)
    return EvalRecord(
        instance_id=instance_id,
        raw="",
        extracted=UNPARSEABLE,
        latency_ms=latency,
        retries=retries,
        failure=failure,
        prompt_sha256=sha,
    )


def query_model(endpoint: ModelEndpoint, prompts: list[tuple[str, str]]) -> list[EvalRecord]:
    """Send (instance id, prompt) pairs with bounded parallelism.

    Transport errors, rate limits, and 5xx responses are retried with
    exponential backoff; whatever still fails yields a failure-marked record
    rather than aborting the batch.  Configuration problems raise before any
    request goes out.
    """
    token = _validate_endpoint(endpoint)
    url = _completions_url(endpoint.base_url)
    if not prompts:
        return []
    with ThreadPoolExecutor(max_workers=max(1, endpoint.max_parallel)) as pool:
        return list(pool.map(lambda item: _query_one(endpoint, url, token, item), prompts))


# ---------------------------------------------------------------------------
# Answer extraction

_KEYWORD_RE = re.compile(r"\b(true|false|uncertain)\b", re.IGNORECASE)
_ANSWER_LINE_RE = re.compile(r"answer\s*:", re.IGNORECASE)


def extract_answer(raw: str) -> str:
    """Final verdict keyword in a response, preferring ``Answer:`` lines.

    The last keyword wins, so hedged text like "true or false" reads as its
    final option.  No keyword at all maps to ``unparseable``.
    """
    if raw:
        answer_lines = [l for l in raw.splitlines() if _ANSWER_LINE_RE.search(l)]
        for line in reversed(answer_lines):
            hits = _KEYWORD_RE.findall(line)
            if hits:
                return hits[-1].capitalize()
        hits = _KEYWORD_RE.findall(raw)
        if hits:
            return hits[-1].capitalize()
    return UNPARSEABLE


def is_ambiguous(raw: str) -> bool:
    """More than one distinct verdict keyword appears in the response."""
    return len({h.lower() for h in _KEYWORD_RE.findall(raw or "")}) > 1


# ---------------------------------------------------------------------------
# Scoring

@dataclass(frozen=True)
class Cell:
    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> float:
        """Accuracy percentage, one decimal place."""
        return round(100.0 * self.correct / self.total, 1) if self.total else 0.0

    def add(self, correct: bool) -> "Cell":
        return Cell(self.correct + (1 if correct else 0), self.total + 1)


@dataclass(frozen=True)
class ScoreReport:
    mode: str
    overall: Cell
    by_depth: dict[int, Cell]
    by_form: dict[str, Cell]
    confusion: dict[str, dict[str, int]]
    parse_failures: int
    random_baseline: float | None = None
    delta: float | None = None

    @property
    def parse_failure_rate(self) -> float:
        return round(100.0 * self.parse_failures / self.overall.total, 1) if self.overall.total else 0.0

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "n": self.overall.total,
            "accuracy": self.overall.accuracy,
            "by_depth": {
                str(d): {"correct": c.correct, "total": c.total, "accuracy": c.accuracy}
                for d, c in sorted(self.by_depth.items())
            },
            "by_form": {
                f: {"correct": c.correct, "total": c.total, "accuracy": c.accuracy}
                for f, c in sorted(self.by_form.items())
            },
            "confusion": self.confusion,
            "parse_failures": self.parse_failures,
            "parse_failure_rate": self.parse_failure_rate,
        }
        if self.random_baseline is not None:
            out["random_baseline"] = round(self.random_baseline, 1)
            out["delta"] = self.delta
        return out

    def to_csv_rows(self) -> list[list]:
        rows: list[list] = [["section", "key", "correct", "total", "accuracy"]]
        rows.append(["overall", "", self.overall.correct, self.overall.total, self.overall.accuracy])
        for depth, cell in sorted(self.by_depth.items()):
            rows.append(["depth", depth, cell.correct, cell.total, cell.accuracy])
        for form, cell in sorted(self.by_form.items()):
            rows.append(["form", form, cell.correct, cell.total, cell.accuracy])
        return rows


def score(records: list[EvalRecord], gold: list[Instance], mode: str = "task") -> ScoreReport:
    """Score records against gold instances.

    By-form accuracy aggregates depth-1 instances only.  Unparseable answers
    count as incorrect and are additionally reported as parse failures.  In
    ``pk`` mode the report carries the random baseline (one over three
    options) and the absolute gap to it.
    """
    by_id = {inst.id: inst for inst in gold}
    overall = Cell()
    by_depth: dict[int, Cell] = {}
    by_form: dict[str, Cell] = {}
    confusion: dict[str, dict[str, int]] = {
        label: {p: 0 for p in LABELS + (UNPARSEABLE,)} for label in LABELS
    }
    parse_failures = 0
    for record in records:
        inst = by_id.get(record.instance_id)
        if inst is None:
            raise UnmatchedRecord(f"record {record.instance_id!r} has no gold instance")
        correct = record.extracted == inst.label
        overall = overall.add(correct)
        depth = inst.meta.depth
        by_depth[depth] = by_depth.get(depth, Cell()).add(correct)
        if depth == 1:
            form = inst.meta.root_form
            by_form[form] = by_form.get(form, Cell()).add(correct)
        predicted = record.extracted if record.extracted in confusion[inst.label] else UNPARSEABLE
        confusion[inst.label][predicted] += 1
        if record.extracted == UNPARSEABLE:
            parse_failures += 1

    random_baseline = None
    delta = None
    if mode == "pk":
        random_baseline = 100.0 / len(LABELS)
        raw_accuracy = 100.0 * overall.correct / overall.total if overall.total else 0.0
        delta = round(abs(raw_accuracy - random_baseline), 1)
    return ScoreReport(
        mode=mode,
        overall=overall,
        by_depth=by_depth,
        by_form=by_form,
        confusion=confusion,
        parse_failures=parse_failures,
        random_baseline=random_baseline,
        delta=delta,
    )
