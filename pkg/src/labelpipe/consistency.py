"""Per-sample agreement across repeated LLM annotations.

Each sample is annotated several times at nonzero temperature; the modal
label becomes its training label and the fraction of draws agreeing with
the mode is its consistency score.  Scores are exact rationals: with 3
binary draws the only possible values are 2/3 and 1.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .errors import EmptyVector


def modal_label(labels) -> str:
    """Most frequent label; ties broken lexicographically."""
    labels = list(labels)
    if not labels:
        raise EmptyVector("modal_label of empty vector")
    counts = Counter(labels)
    top = max(counts.values())
    return min(label for label, n in counts.items() if n == top)


def consistency_score(labels) -> Fraction:
    """Fraction of entries equal to the modal label, exact."""
    labels = list(labels)
    if not labels:
        raise EmptyVector("consistency_score of empty vector")
    m = modal_label(labels)
    return Fraction(sum(1 for x in labels if x == m), len(labels))


@dataclass(frozen=True)
class AnnotationRecord:
    sample_id: str
    labels: tuple
    modal: str
    consistency: Fraction

    @classmethod
    def from_labels(cls, sample_id: str, labels) -> "AnnotationRecord":
        labels = tuple(labels)
        return cls(
            sample_id=sample_id,
            labels=labels,
            modal=modal_label(labels),
            consistency=consistency_score(labels),
        )

    def to_json_obj(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "labels": list(self.labels),
            "modal": self.modal,
            "consistency": round(float(self.consistency), 6),
        }


def build_records(annotations_by_sample: dict) -> tuple[list[AnnotationRecord], list[str]]:
    """Group parsed iteration labels into records.

    ``annotations_by_sample`` maps sample_id -> list of labels, where an
    unparseable iteration is None.  None entries are dropped (the vector
    shortens); samples with zero parseable iterations are returned
    separately as excluded ids.
    """
    records = []
    excluded = []
    for sample_id, labels in annotations_by_sample.items():
        usable = [x for x in labels if x is not None]
        if not usable:
            excluded.append(sample_id)
            continue
        records.append(AnnotationRecord.from_labels(sample_id, usable))
    return records, excluded


def filter_by_consistency(records, threshold) -> tuple[list, list]:
    """Partition records into (kept, dropped) at consistency >= threshold."""
    if isinstance(threshold, float):
        # Treat the decimal the caller wrote as exact, not its binary float.
        threshold = Fraction(str(threshold))
    else:
        threshold = Fraction(threshold)
    if not (0 < threshold <= 1):
        raise ValueError("threshold must be in (0, 1]")
    kept, dropped = [], []
    for rec in records:
        (kept if rec.consistency >= threshold else dropped).append(rec)
    return kept, dropped


def export_report(records, path) -> None:
    """Line-delimited JSON consistency report."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_obj(), ensure_ascii=False,
                                separators=(",", ":")) + "\n")
