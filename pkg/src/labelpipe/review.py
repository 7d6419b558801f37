"""Human-in-the-loop prompt iteration: disagreement triage and prompt deltas.

The operator reviews samples where the LLM and the human label disagree,
clarifies the prompt, and re-runs; metric deltas between prompt versions
show whether the revision helped.  Reviewer decisions live in an
append-only audit log inside the pipeline store; prompt text stays in
versioned files so revisions remain diffable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

from .errors import MisalignedIds, MissingRun
from .evaluator import METRIC_NAMES, MetricsReport

log = logging.getLogger(__name__)

RESOLUTION_STATUSES = ("open", "prompt-clarified", "gold-suspect", "dismissed")

# A task is expected to need at most this many prompt revisions; beyond it
# the prompt risks overfitting to the validation subset.
MAX_ADVISED_REVISIONS = 2


@dataclass(frozen=True)
class Disagreement:
    sample_id: str
    text: str
    gold: str
    llm: str
    prompt_id: str
    prompt_version: int
    status: str = "open"
    note: str = ""
    consistency: float | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "sample_id": self.sample_id, "text": self.text,
            "gold": self.gold, "llm": self.llm,
            "prompt_id": self.prompt_id,
            "prompt_version": self.prompt_version,
            "status": self.status, "note": self.note,
        }
        if self.consistency is not None:
            obj["consistency"] = self.consistency
        return obj


def extract_disagreements(llm_labels: dict, gold: dict, texts: dict,
                          prompt_id: str, prompt_version: int,
                          consistency: dict | None = None) -> list[Disagreement]:
    """One record per sample where the LLM and gold labels differ.

    All maps are keyed by sample id; output is ordered by sample id.
    """
    if set(llm_labels) != set(gold):
        raise MisalignedIds("llm label ids and gold ids differ")
    consistency = consistency or {}
    out = []
    for sid in sorted(llm_labels):
        if llm_labels[sid] != gold[sid]:
            out.append(Disagreement(
                sample_id=sid, text=texts.get(sid, ""),
                gold=gold[sid], llm=llm_labels[sid],
                prompt_id=prompt_id, prompt_version=prompt_version,
                consistency=consistency.get(sid)))
    return out


@dataclass(frozen=True)
class PromptDeltaReport:
    task_id: str
    version_a: int
    version_b: int
    before: MetricsReport
    after: MetricsReport
    deltas: dict = field(default_factory=dict)
    regressions: tuple = ()

    def to_json_obj(self) -> dict:
        return {
            "task_id": self.task_id,
            "version_a": self.version_a, "version_b": self.version_b,
            "before": self.before.to_json_obj(),
            "after": self.after.to_json_obj(),
            "deltas": {m: float(v) for m, v in self.deltas.items()},
            "regressions": list(self.regressions),
        }


def prompt_delta(task_id: str, report_a: MetricsReport | None,
                 report_b: MetricsReport | None,
                 version_a: int, version_b: int) -> PromptDeltaReport:
    """Per-metric deltas (after minus before) between two prompt versions.

    Both reports must exist and cover the same evaluation set (same n when
    counts are known).
    """
    if report_a is None:
        raise MissingRun(f"prompt version {version_a}")
    if report_b is None:
        raise MissingRun(f"prompt version {version_b}")
    if report_a.n is not None and report_b.n is not None \
            and report_a.n != report_b.n:
        raise MisalignedIds(
            f"runs cover different sample sets (n={report_a.n} vs {report_b.n})")
    deltas = {m: report_b.metric(m) - report_a.metric(m) for m in METRIC_NAMES}
    regressions = tuple(m for m in METRIC_NAMES if deltas[m] < 0)
    return PromptDeltaReport(
        task_id=task_id, version_a=version_a, version_b=version_b,
        before=report_a, after=report_b, deltas=deltas,
        regressions=regressions)


def iteration_guard(version_history) -> str | None:
    """Advisory warning once a task exceeds the advised revision count."""
    revisions = max(0, len(list(version_history)) - 1)
    if revisions > MAX_ADVISED_REVISIONS:
        msg = (f"prompt has been revised {revisions} times; more than "
               f"{MAX_ADVISED_REVISIONS} revisions risks overfitting the "
               f"prompt to the validation subset")
        log.warning(msg)
        return msg
    return None


class ReviewLog:
    """Append-only audit log of disagreement status changes.

    Each line is one event; replaying the log reconstructs current state.
    """

    def __init__(self, path):
        self.path = path

    def append(self, task_id: str, sample_id: str, status: str,
               note: str = "", actor: str = "") -> dict:
        if status not in RESOLUTION_STATUSES:
            raise ValueError(f"unknown status {status!r}; "
                             f"expected one of {RESOLUTION_STATUSES}")
        event = {"task_id": task_id, "sample_id": sample_id,
                 "status": status, "note": note, "actor": actor,
                 "seq": self._next_seq()}
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False,
                                separators=(",", ":")) + "\n")
        return event

    def _next_seq(self) -> int:
        return len(self.events())

    def events(self) -> list[dict]:
        import os
        if not os.path.exists(self.path):
            return []
        out = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    out.append(json.loads(line))
        return out

    def current_status(self, task_id: str) -> dict:
        """sample_id -> (status, note) after replaying the log in order."""
        state: dict = {}
        for event in self.events():
            if event["task_id"] == task_id:
                state[event["sample_id"]] = {
                    "status": event["status"], "note": event["note"]}
        return state


def apply_review_state(disagreements, state: dict) -> list[Disagreement]:
    out = []
    for d in disagreements:
        if d.sample_id in state:
            s = state[d.sample_id]
            d = replace(d, status=s["status"], note=s["note"])
        out.append(d)
    return out


def export_disagreements(disagreements, jsonl_path=None, sheet_path=None):
    """Line-delimited JSON export plus a human-readable review sheet."""
    if jsonl_path is not None:
        with open(jsonl_path, "w", encoding="utf-8") as fh:
            for d in disagreements:
                fh.write(json.dumps(d.to_json_obj(), ensure_ascii=False,
                                    separators=(",", ":")) + "\n")
    if sheet_path is not None:
        with open(sheet_path, "w", encoding="utf-8") as fh:
            for d in disagreements:
                fh.write(f"--- {d.sample_id} [{d.status}]\n")
                fh.write(f"text:  {d.text}\n")
                fh.write(f"gold:  {d.gold}\n")
                fh.write(f"llm:   {d.llm}  "
                         f"(prompt {d.prompt_id} v{d.prompt_version})\n")
                if d.note:
                    fh.write(f"note:  {d.note}\n")
                fh.write("\n")
