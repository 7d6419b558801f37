"""Corpus ingestion, schema binarization, and deterministic splitting.

Corpus files are line-delimited JSON, one record per line, UTF-8:

    {"id": "s1", "text": "...", "label": "past", "meta": {"study": "x"}}

`label` and `meta` are optional.  Record order in the file is the corpus
order and is preserved everywhere.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field

from .errors import (
    DegenerateSchema,
    DuplicateId,
    EmptyText,
    InsufficientSamples,
    MalformedRecord,
    UnknownLabel,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TextSample:
    id: str
    text: str
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LabeledSample:
    sample: TextSample
    gold: str | None = None
    surrogate: str | None = None

    @property
    def id(self) -> str:
        return self.sample.id

    @property
    def text(self) -> str:
        return self.sample.text


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    positive_label: str
    negative_label: str
    source_schema: tuple = ()
    description: str = ""

    def __post_init__(self):
        if self.positive_label == self.negative_label:
            raise ValueError("positive_label must differ from negative_label")

    @property
    def labels(self) -> tuple:
        return (self.positive_label, self.negative_label)


@dataclass(frozen=True)
class SplitPlan:
    train_n: int = 1000
    prompt_val_n: int = 250
    tune_val_n: int = 250
    test_n: int = 1000
    seed: int = 0

    def __post_init__(self):
        for name in ("train_n", "prompt_val_n", "tune_val_n", "test_n"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def total(self) -> int:
        return self.train_n + self.prompt_val_n + self.tune_val_n + self.test_n


def _record_to_sample(obj: dict, line_number: int) -> LabeledSample:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_number, "record is not a JSON object")
    if "id" not in obj or "text" not in obj:
        raise MalformedRecord(line_number, "missing required key 'id' or 'text'")
    sid = obj["id"]
    text = obj["text"]
    if not isinstance(sid, str) or not sid:
        raise MalformedRecord(line_number, "'id' must be a non-empty string")
    if not isinstance(text, str):
        raise MalformedRecord(line_number, "'text' must be a string")
    if not text.strip():
        raise EmptyText(sid)
    meta = obj.get("meta") or {}
    if not isinstance(meta, dict):
        raise MalformedRecord(line_number, "'meta' must be an object")
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise MalformedRecord(line_number, "'label' must be a string")
    return LabeledSample(
        sample=TextSample(id=sid, text=text, meta=dict(meta)), gold=label
    )


def ingest_corpus(path) -> list[LabeledSample]:
    """Read a line-delimited JSON corpus file, preserving file order."""
    samples: list[LabeledSample] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_number, str(exc)) from exc
            rec = _record_to_sample(obj, line_number)
            if rec.id in seen:
                raise DuplicateId(rec.id)
            seen.add(rec.id)
            samples.append(rec)
    return samples


def record_line(rec: LabeledSample) -> str:
    """Canonical single-line serialization of one record."""
    obj = {"id": rec.id, "text": rec.text}
    label = rec.surrogate if rec.gold is None else rec.gold
    if label is not None:
        obj["label"] = label
    if rec.sample.meta:
        obj["meta"] = rec.sample.meta
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def export_corpus(samples, path) -> None:
    """Write records in the canonical format; ingest(export(x)) round-trips."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in samples:
            fh.write(record_line(rec) + "\n")


def binarize(schema, samples) -> list[tuple[TaskSpec, list[LabeledSample]]]:
    """Turn a k-class schema into k one-vs-rest binary tasks.

    Every output corpus has the same size and order as the input; gold labels
    become positive (the class) or negative ("not_<class>").
    """
    schema = list(schema)
    if len(schema) < 2:
        raise DegenerateSchema(schema)
    allowed = set(schema)
    for rec in samples:
        if rec.gold is not None and rec.gold not in allowed:
            raise UnknownLabel(rec.id, rec.gold)

    tasks = []
    for cls in schema:
        spec = TaskSpec(
            task_id=cls,
            positive_label=cls,
            negative_label=f"not_{cls}",
            source_schema=tuple(schema),
        )
        recoded = []
        n_pos = 0
        for rec in samples:
            gold = None
            if rec.gold is not None:
                gold = cls if rec.gold == cls else spec.negative_label
                n_pos += gold == cls
            recoded.append(LabeledSample(sample=rec.sample, gold=gold))
        if n_pos == 0:
            # Near-zero positive rates are legitimate (heavily imbalanced
            # tasks exist); warn instead of refusing.
            log.warning("task %r has no positive samples", cls)
        tasks.append((spec, recoded))
    return tasks


def _fisher_yates(items: list, rng: random.Random) -> None:
    # Explicit Fisher-Yates so the shuffle algorithm is pinned by this code,
    # not by the stdlib's implementation choice.
    for i in range(len(items) - 1, 0, -1):
        j = rng.randrange(i + 1)
        items[i], items[j] = items[j], items[i]


def split(samples, plan: SplitPlan, stratify: bool = False) -> dict:
    """Draw disjoint train / prompt_val / tune_val / test subsets.

    Uniform sampling without replacement via a seeded Fisher-Yates shuffle
    over the corpus order.  With ``stratify=True`` the shuffle is applied
    within each gold-label stratum and splits are filled proportionally.
    """
    if plan.total > len(samples):
        raise InsufficientSamples(plan.total, len(samples))
    rng = random.Random(plan.seed)

    if not stratify:
        pool = list(samples)
        _fisher_yates(pool, rng)
    else:
        by_label: dict = {}
        for rec in samples:
            by_label.setdefault(rec.gold, []).append(rec)
        pool = []
        strata = []
        for label in sorted(by_label, key=lambda x: (x is None, x)):
            group = by_label[label]
            _fisher_yates(group, rng)
            strata.append(group)
        # Interleave strata proportionally (least fractional progress
        # first) so every prefix is roughly label-proportional.
        idx = [0] * len(strata)
        total = sum(len(g) for g in strata)
        while len(pool) < total:
            k = min(
                (k for k in range(len(strata)) if idx[k] < len(strata[k])),
                key=lambda k: ((idx[k] + 1) / len(strata[k]), k))
            pool.append(strata[k][idx[k]])
            idx[k] += 1

    out = {}
    cursor = 0
    for name, n in (
        ("train", plan.train_n),
        ("prompt_val", plan.prompt_val_n),
        ("tune_val", plan.tune_val_n),
        ("test", plan.test_n),
    ):
        out[name] = pool[cursor:cursor + n]
        cursor += n
    return out


def split_manifest(splits: dict) -> dict:
    """JSON-ready manifest listing sample ids per split."""
    return {name: [rec.id for rec in part] for name, part in splits.items()}


def write_split_manifest(splits: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(split_manifest(splits), fh, indent=2, sort_keys=True)
        fh.write("\n")
