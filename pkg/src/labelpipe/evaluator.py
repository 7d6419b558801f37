"""Binary-classification metrics, PR curves, arm comparisons, drift deltas.

Metric values are exact rationals internally (confusion counts are ints,
derived metrics Fractions) and only rounded at display time.

Display rounding is two decimals, round-half-even.  Published comparison
tables in this domain round full-precision values we do not have; medians
recomputed from their two-decimal per-task entries often land exactly on a
third-decimal midpoint, where the true rounding direction is unrecoverable
(the published tables themselves resolve identical midpoints both ways).
Half-even is the deterministic rule used here; any midpoint cell is
ambiguous by half a display unit regardless of the rule chosen.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from importlib import resources

from .errors import (
    EmptyInput,
    MisalignedIds,
    NoPositives,
    RaggedGrid,
    TaskSetMismatch,
)

METRIC_NAMES = ("accuracy", "f1", "precision", "recall")


def display_round(value, places: int = 2) -> Decimal:
    """Two-decimal display value of an exact metric, rounding half to even."""
    if isinstance(value, Fraction):
        dec = Decimal(value.numerator) / Decimal(value.denominator)
    elif isinstance(value, float):
        dec = Decimal(str(value))
    else:
        dec = Decimal(value)
    q = Decimal(1).scaleb(-places)
    return dec.quantize(q, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class MetricsReport:
    task_id: str
    model: str
    arm: str
    tp: int | None = None
    fp: int | None = None
    fn: int | None = None
    tn: int | None = None
    values: dict = field(default_factory=dict)  # metric name -> Fraction

    @property
    def n(self) -> int | None:
        if self.tp is None:
            return None
        return self.tp + self.fp + self.fn + self.tn

    def metric(self, name: str) -> Fraction:
        return self.values[name]

    def to_json_obj(self) -> dict:
        obj = {"task_id": self.task_id, "model": self.model, "arm": self.arm}
        if self.tp is not None:
            obj.update(tp=self.tp, fp=self.fp, fn=self.fn, tn=self.tn, n=self.n)
        obj.update({k: float(v) for k, v in self.values.items()})
        obj.update({f"{k}_display": str(display_round(v))
                    for k, v in self.values.items()})
        return obj


def _ratio(num: int, den: int) -> Fraction:
    # 0/0 convention: 0.  Matches published all-zero rows for tasks where a
    # model never predicts the positive class.
    return Fraction(num, den) if den else Fraction(0)


def metrics_from_counts(tp, fp, fn, tn, task_id="", model="", arm="") -> MetricsReport:
    n = tp + fp + fn + tn
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * tp, 2 * tp + fp + fn)
    accuracy = _ratio(tp + tn, n)
    return MetricsReport(
        task_id=task_id, model=model, arm=arm, tp=tp, fp=fp, fn=fn, tn=tn,
        values={"accuracy": accuracy, "f1": f1,
                "precision": precision, "recall": recall},
    )


def metrics_from_values(task_id, model, arm, accuracy, f1, precision, recall) -> MetricsReport:
    """A report carrying metric values only (e.g., ingested from a table)."""
    def frac(x):
        if isinstance(x, Fraction):
            return x
        return Fraction(str(x)) if isinstance(x, (float, str)) else Fraction(x)
    return MetricsReport(
        task_id=task_id, model=model, arm=arm,
        values={"accuracy": frac(accuracy), "f1": frac(f1),
                "precision": frac(precision), "recall": frac(recall)},
    )


def compute_metrics(predictions: dict, gold: dict, positive_label: str,
                    task_id="", model="", arm="") -> MetricsReport:
    """Confusion counts and derived metrics over id-aligned label maps."""
    if set(predictions) != set(gold):
        raise MisalignedIds(
            f"prediction ids and gold ids differ "
            f"(only-pred={len(set(predictions) - set(gold))}, "
            f"only-gold={len(set(gold) - set(predictions))})")
    tp = fp = fn = tn = 0
    for sid, pred in predictions.items():
        p = pred == positive_label
        g = gold[sid] == positive_label
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    return metrics_from_counts(tp, fp, fn, tn, task_id=task_id, model=model, arm=arm)


@dataclass(frozen=True)
class PrCurve:
    points: tuple            # ((recall, precision), ...) thresholds descending
    thresholds: tuple
    average_precision: Fraction

    def to_json_obj(self) -> dict:
        return {
            "points": [[float(r), float(p)] for r, p in self.points],
            "thresholds": [float(t) for t in self.thresholds],
            "average_precision": float(self.average_precision),
        }


def pr_curve(scores: dict, gold: dict, positive_label: str) -> PrCurve:
    """Precision-recall points over descending score thresholds.

    Tied scores form one threshold.  Average precision is the step-wise sum
    of precision times recall increment.
    """
    if set(scores) != set(gold):
        raise MisalignedIds("score ids and gold ids differ")
    n_pos = sum(1 for v in gold.values() if v == positive_label)
    if n_pos == 0:
        raise NoPositives("no positive gold labels")
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    points = []
    thresholds = []
    tp = fp = 0
    prev_recall = Fraction(0)
    ap = Fraction(0)
    i = 0
    while i < len(ranked):
        threshold = ranked[i][1]
        while i < len(ranked) and ranked[i][1] == threshold:
            sid = ranked[i][0]
            if gold[sid] == positive_label:
                tp += 1
            else:
                fp += 1
            i += 1
        recall = Fraction(tp, n_pos)
        precision = Fraction(tp, tp + fp)
        points.append((recall, precision))
        thresholds.append(threshold)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return PrCurve(points=tuple(points), thresholds=tuple(thresholds),
                   average_precision=ap)


def median_across_tasks(values) -> Fraction:
    """Exact median; even count averages the two central values."""
    values = sorted(
        Fraction(str(v)) if isinstance(v, float) else Fraction(v)
        for v in values)
    if not values:
        raise EmptyInput("median of empty list")
    n = len(values)
    mid = n // 2
    if n % 2:
        return values[mid]
    return (values[mid - 1] + values[mid]) / 2


@dataclass(frozen=True)
class ArmComparison:
    tasks: tuple
    cells: dict       # (model, arm) -> {task_id -> MetricsReport}
    medians: dict     # (model, arm) -> {metric -> Fraction}
    highlights: dict  # model -> {metric -> arm with the max median}

    def to_json_obj(self) -> dict:
        return {
            "tasks": list(self.tasks),
            "medians": [
                {
                    "model": model, "arm": arm,
                    **{m: float(v) for m, v in vals.items()},
                    **{f"{m}_display": str(display_round(v))
                       for m, v in vals.items()},
                }
                for (model, arm), vals in self.medians.items()
            ],
            "highlights": {
                model: dict(metric_arm)
                for model, metric_arm in self.highlights.items()
            },
        }


def arm_comparison(reports) -> ArmComparison:
    """Median-per-metric grid over (model, arm), with per-model maxima marked.

    Every (model, arm) pair must cover the same task set.
    """
    cells: dict = {}
    for rep in reports:
        cells.setdefault((rep.model, rep.arm), {})[rep.task_id] = rep
    task_set = set()
    for grid in cells.values():
        task_set |= set(grid)
    missing = [
        (model, arm, task)
        for (model, arm), grid in sorted(cells.items())
        for task in sorted(task_set)
        if task not in grid
    ]
    if missing:
        raise RaggedGrid(missing)
    tasks = tuple(sorted(task_set))

    medians = {}
    for key, grid in cells.items():
        medians[key] = {
            m: median_across_tasks([grid[t].metric(m) for t in tasks])
            for m in METRIC_NAMES
        }
    highlights: dict = {}
    for model in sorted({model for model, _ in cells}):
        arms = [arm for m, arm in cells if m == model]
        highlights[model] = {}
        for metric in METRIC_NAMES:
            best = max(arms, key=lambda arm: (medians[(model, arm)][metric], arm))
            highlights[model][metric] = best
    return ArmComparison(tasks=tasks, cells=cells, medians=medians,
                         highlights=highlights)


@dataclass(frozen=True)
class DriftReport:
    per_task: dict   # task_id -> {metric -> Fraction delta (b - a)}
    means: dict      # metric -> Fraction

    def to_json_obj(self) -> dict:
        return {
            "per_task": {t: {m: float(v) for m, v in d.items()}
                         for t, d in self.per_task.items()},
            "means": {m: float(v) for m, v in self.means.items()},
        }


def drift_compare(run_a, run_b) -> DriftReport:
    """Paired per-task metric deltas (run_b minus run_a) and their means."""
    a = {rep.task_id: rep for rep in run_a}
    b = {rep.task_id: rep for rep in run_b}
    if set(a) != set(b):
        raise TaskSetMismatch(
            f"task sets differ: only-a={sorted(set(a) - set(b))}, "
            f"only-b={sorted(set(b) - set(a))}")
    if not a:
        raise EmptyInput("no tasks to compare")
    per_task = {}
    for task in sorted(a):
        per_task[task] = {
            m: b[task].metric(m) - a[task].metric(m) for m in METRIC_NAMES
        }
    means = {
        m: sum(d[m] for d in per_task.values()) / len(per_task)
        for m in METRIC_NAMES
    }
    return DriftReport(per_task=per_task, means=means)


def boxplot_export(reports) -> dict:
    """Per-task metric vectors per (model, arm), for external plotting."""
    out: dict = {}
    for rep in sorted(reports, key=lambda r: (r.model, r.arm, r.task_id)):
        key = f"{rep.model}/{rep.arm}"
        slot = out.setdefault(key, {m: [] for m in METRIC_NAMES})
        slot.setdefault("tasks", []).append(rep.task_id)
        for m in METRIC_NAMES:
            slot[m].append(float(rep.metric(m)))
    return out


# --- bundled golden fixtures ----------------------------------------------

def _load_data_json(name: str):
    with resources.files("labelpipe.data").joinpath(name).open("r") as fh:
        # parse_float keeps two-decimal table entries exact.
        return json.load(fh, parse_float=Fraction)


def load_benchmark_reports() -> list[MetricsReport]:
    """The bundled per-task benchmark grid (BERT-family + few-shot teacher)."""
    data = _load_data_json("benchmark_task_metrics.json")
    reports = []
    for row in data["rows"]:
        reports.append(metrics_from_values(
            task_id=row["task"], model=row["model"], arm=row["arm"],
            accuracy=row["accuracy"], f1=row["f1"],
            precision=row["precision"], recall=row["recall"],
        ))
    return reports


def load_published_medians() -> dict:
    """Published median table: (model, arm) -> {metric -> display string}."""
    data = _load_data_json("benchmark_published_medians.json")
    return {(row["model"], row["arm"]):
            {m: str(row[m]) for m in METRIC_NAMES}
            for row in data["rows"]}


def load_noise_ablation() -> list[dict]:
    """Per-task F1 with/without consistency filtering, plus difference."""
    return _load_data_json("noise_ablation_f1.json")["rows"]
