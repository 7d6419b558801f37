"""Built-in student classifier plus the external-trainer process contract.

The built-in student is a hashed word-n-gram logistic regression trained by
plain mini-batch SGD.  Everything is seed-deterministic: featurization uses
a keyed blake2 hash, shuffling uses an explicit seeded PRNG, and artifacts
serialize weights with full round-trip precision, so identical inputs give
bit-identical models.

Transformer-class students run out of process through ``external_train``,
which exchanges line-delimited JSON files with any command that honors the
contract (train/val/test files + config in, predictions out).
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
import subprocess
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import LabeledSample, record_line
from .errors import (
    DegenerateLabels,
    IncompletePredictions,
    NonFiniteLoss,
    NonZeroExit,
)
from .evaluator import compute_metrics

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class FeatureSpec:
    n_gram_range: tuple = (1, 2)
    hash_dim: int = 2 ** 16
    tf_idf: bool = False
    lowercase: bool = True

    def __post_init__(self):
        lo, hi = self.n_gram_range
        if not (1 <= lo <= hi <= 3):
            raise ValueError("n_gram_range must satisfy 1 <= lo <= hi <= 3")
        if not (2 ** 10 <= self.hash_dim <= 2 ** 22):
            raise ValueError("hash_dim out of range")
        if self.hash_dim & (self.hash_dim - 1):
            raise ValueError("hash_dim must be a power of two")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 4
    batch_size: int = 8
    l2: float = 0.0
    seed: int = 0
    class_weighting: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("learning_rate, epochs, batch_size must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")


# Grid axes keep the 3 x 2 x 3 shape used for the transformer students, with
# value ranges suited to a linear model.
DEFAULT_GRID = {
    "learning_rate": [0.01, 0.05, 0.1],
    "batch_size": [8, 16],
    "epochs": [2, 4, 6],
}


def _hash_slot(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & (dim - 1)


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    if lowercase:
        text = text.lower()
    return _TOKEN_RE.findall(text)


def ngram_counts(text: str, spec: FeatureSpec) -> dict[int, float]:
    tokens = tokenize(text, spec.lowercase)
    lo, hi = spec.n_gram_range
    counts: dict[int, float] = {}
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            slot = _hash_slot(" ".join(tokens[i:i + n]), spec.hash_dim)
            counts[slot] = counts.get(slot, 0.0) + 1.0
    return counts


def fit_idf(texts, spec: FeatureSpec) -> dict[int, float]:
    """Smoothed idf per hash slot, fit on the training split only."""
    df: dict[int, int] = {}
    n_docs = 0
    for text in texts:
        n_docs += 1
        for slot in ngram_counts(text, spec):
            df[slot] = df.get(slot, 0) + 1
    return {slot: math.log((1 + n_docs) / (1 + d)) + 1.0
            for slot, d in df.items()}


def featurize(text: str, spec: FeatureSpec, idf: dict | None = None) -> dict[int, float]:
    """L2-normalized hashed n-gram vector (tf-idf weighted when fitted)."""
    vec = ngram_counts(text, spec)
    if spec.tf_idf:
        idf = idf or {}
        vec = {slot: tf * idf.get(slot, 1.0) for slot, tf in vec.items()}
    norm = math.sqrt(sum(v * v for v in vec.values()))
    if norm > 0:
        vec = {slot: v / norm for slot, v in vec.items()}
    return vec


@dataclass
class ModelArtifact:
    weights: np.ndarray
    bias: float
    feature_spec: FeatureSpec
    train_config: TrainConfig
    positive_label: str
    negative_label: str
    idf: dict = field(default_factory=dict)
    threshold: float = 0.5
    provenance: dict = field(default_factory=dict)
    epoch_losses: list = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "format": "labelpipe-linear-model/1",
            "weights": [repr(w) for w in self.weights.tolist()],
            "bias": repr(self.bias),
            "feature_spec": {**asdict(self.feature_spec),
                             "n_gram_range": list(self.feature_spec.n_gram_range)},
            "train_config": asdict(self.train_config),
            "positive_label": self.positive_label,
            "negative_label": self.negative_label,
            "idf": {str(k): repr(v) for k, v in sorted(self.idf.items())},
            "threshold": self.threshold,
            "provenance": self.provenance,
            "epoch_losses": [repr(x) for x in self.epoch_losses],
        }

    def to_bytes(self) -> bytes:
        return (json.dumps(self.to_json_obj(), sort_keys=True,
                           separators=(",", ":")) + "\n").encode("utf-8")

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ModelArtifact":
        spec_obj = dict(obj["feature_spec"])
        spec_obj["n_gram_range"] = tuple(spec_obj["n_gram_range"])
        return cls(
            weights=np.array([float(w) for w in obj["weights"]]),
            bias=float(obj["bias"]),
            feature_spec=FeatureSpec(**spec_obj),
            train_config=TrainConfig(**obj["train_config"]),
            positive_label=obj["positive_label"],
            negative_label=obj["negative_label"],
            idf={int(k): float(v) for k, v in obj["idf"].items()},
            threshold=obj["threshold"],
            provenance=obj.get("provenance", {}),
            epoch_losses=[float(x) for x in obj.get("epoch_losses", [])],
        )


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _dot(weights: np.ndarray, vec: dict) -> float:
    return sum(weights[slot] * val for slot, val in vec.items())


def logistic_loss_and_grad(weights, bias, vectors, targets, l2):
    """Mean logistic loss and its analytic gradient (dense, for checking)."""
    n = len(vectors)
    grad_w = np.zeros_like(weights)
    grad_b = 0.0
    loss = 0.0
    for vec, y in zip(vectors, targets):
        z = _dot(weights, vec) + bias
        p = _sigmoid(z)
        # log-loss, numerically guarded
        eps = 1e-12
        loss += -(y * math.log(p + eps) + (1 - y) * math.log(1 - p + eps))
        err = p - y
        for slot, val in vec.items():
            grad_w[slot] += err * val
        grad_b += err
    loss = loss / n + 0.5 * l2 * float(np.dot(weights, weights))
    grad_w = grad_w / n + l2 * weights
    grad_b /= n
    return loss, grad_w, grad_b


def train(samples, labels, spec: FeatureSpec, config: TrainConfig,
          provenance: dict | None = None) -> ModelArtifact:
    """Mini-batch SGD on logistic loss; deterministic for a fixed seed."""
    texts = [s.text if hasattr(s, "text") else s for s in samples]
    if len(texts) != len(labels):
        raise ValueError("samples and labels length mismatch")
    classes = sorted(set(labels))
    if len(texts) < 2 or len(classes) != 2:
        raise DegenerateLabels(f"need two classes in >= 2 samples, got {classes}")
    # Positive class: the lexicographically-first label unless the caller's
    # provenance names one.
    positive = (provenance or {}).get("positive_label", classes[0])
    negative = classes[1] if positive == classes[0] else classes[0]

    idf = fit_idf(texts, spec) if spec.tf_idf else {}
    vectors = [featurize(t, spec, idf) for t in texts]
    targets = [1.0 if y == positive else 0.0 for y in labels]

    pos_weight = neg_weight = 1.0
    if config.class_weighting:
        n_pos = sum(targets)
        n_neg = len(targets) - n_pos
        pos_weight = len(targets) / (2.0 * n_pos)
        neg_weight = len(targets) / (2.0 * n_neg)

    weights = np.zeros(spec.hash_dim)
    bias = 0.0
    rng = random.Random(config.seed)
    order = list(range(len(vectors)))
    epoch_losses = []
    for _ in range(config.epochs):
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            grad: dict[int, float] = {}
            grad_b = 0.0
            for idx in batch:
                vec = vectors[idx]
                y = targets[idx]
                w = pos_weight if y else neg_weight
                p = _sigmoid(_dot(weights, vec) + bias)
                err = w * (p - y)
                for slot, val in vec.items():
                    grad[slot] = grad.get(slot, 0.0) + err * val
                grad_b += err
            scale = config.learning_rate / len(batch)
            if config.l2:
                weights *= 1.0 - config.learning_rate * config.l2
            for slot, g in grad.items():
                weights[slot] -= scale * g
            bias -= scale * grad_b
        loss = _mean_loss(weights, bias, vectors, targets, config.l2)
        if not math.isfinite(loss):
            raise NonFiniteLoss(f"loss diverged: {loss}")
        epoch_losses.append(loss)

    return ModelArtifact(
        weights=weights, bias=bias, feature_spec=spec, train_config=config,
        positive_label=positive, negative_label=negative, idf=idf,
        provenance=dict(provenance or {}), epoch_losses=epoch_losses,
    )


def _mean_loss(weights, bias, vectors, targets, l2) -> float:
    eps = 1e-12
    total = 0.0
    for vec, y in zip(vectors, targets):
        p = _sigmoid(_dot(weights, vec) + bias)
        total += -(y * math.log(p + eps) + (1 - y) * math.log(1 - p + eps))
    return total / len(vectors) + 0.5 * l2 * float(np.dot(weights, weights))


def predict(model: ModelArtifact, text: str) -> tuple[float, str]:
    """Positive-class score and thresholded label for one text."""
    vec = featurize(text, model.feature_spec, model.idf)
    score = _sigmoid(_dot(model.weights, vec) + model.bias)
    label = model.positive_label if score >= model.threshold else model.negative_label
    return score, label


def predict_many(model: ModelArtifact, samples) -> dict[str, tuple[float, str]]:
    return {s.id: predict(model, s.text) for s in samples}


def grid_search(train_samples, train_labels, val_samples, val_gold,
                spec: FeatureSpec, grid: dict | None = None, seed: int = 0,
                positive_label: str | None = None):
    """Train every grid cell, pick the highest validation F1.

    Cells are visited in row-major order (learning_rate, batch_size, epochs);
    ties keep the earliest cell.  Failed cells are recorded and skipped.
    """
    grid = grid or DEFAULT_GRID
    val_gold_map = {s.id: g for s, g in zip(val_samples, val_gold)}
    if len(set(val_gold)) < 2:
        raise DegenerateLabels("tune_val split must contain both classes")

    table = []
    best = None  # (f1, position, config, model)
    position = 0
    for lr in grid["learning_rate"]:
        for bs in grid["batch_size"]:
            for ep in grid["epochs"]:
                config = TrainConfig(learning_rate=lr, batch_size=bs,
                                     epochs=ep, seed=seed)
                cell = {"learning_rate": lr, "batch_size": bs, "epochs": ep,
                        "position": position}
                try:
                    prov = {}
                    if positive_label is not None:
                        prov["positive_label"] = positive_label
                    model = train(train_samples, train_labels, spec, config,
                                  provenance=prov)
                    preds = {s.id: predict(model, s.text)[1]
                             for s in val_samples}
                    rep = compute_metrics(preds, val_gold_map,
                                          model.positive_label)
                    cell["f1"] = float(rep.metric("f1"))
                    cell["status"] = "ok"
                    if best is None or cell["f1"] > best[0]:
                        best = (cell["f1"], position, config, model)
                except (DegenerateLabels, NonFiniteLoss) as exc:
                    cell["status"] = "failed"
                    cell["error"] = str(exc)
                table.append(cell)
                position += 1
    if best is None:
        raise DegenerateLabels("every grid cell failed")
    return best[2], best[3], table


# --- external trainer contract --------------------------------------------

def _write_jsonl(samples, labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for s, y in zip(samples, labels):
            rec = LabeledSample(sample=s.sample if hasattr(s, "sample") else s,
                                gold=y)
            fh.write(record_line(rec) + "\n")


def external_train(train_samples, train_labels, val_samples, val_labels,
                   test_samples, command: list[str], workdir,
                   config: dict | None = None, timeout: float = 600.0) -> dict:
    """Run an out-of-process trainer and read back validated predictions.

    Writes ``train.jsonl``, ``val.jsonl``, ``test.jsonl`` and ``config.json``
    into ``workdir`` and invokes ``command`` with those four paths plus the
    output path ``predictions.jsonl`` appended as arguments.  The trainer
    must write one ``{"sample_id", "score", "label"}`` object per test
    sample.
    """
    from pathlib import Path
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "train": workdir / "train.jsonl",
        "val": workdir / "val.jsonl",
        "test": workdir / "test.jsonl",
        "config": workdir / "config.json",
        "predictions": workdir / "predictions.jsonl",
    }
    _write_jsonl(train_samples, train_labels, paths["train"])
    _write_jsonl(val_samples, val_labels, paths["val"])
    _write_jsonl(test_samples, [None] * len(test_samples), paths["test"])
    with open(paths["config"], "w", encoding="utf-8") as fh:
        json.dump(config or {}, fh, indent=2, sort_keys=True)

    argv = list(command) + [str(paths[k]) for k in
                            ("train", "val", "test", "config", "predictions")]
    proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    if proc.returncode != 0:
        raise NonZeroExit(proc.returncode, proc.stderr[-2000:])

    predictions = {}
    with open(paths["predictions"], encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            predictions[obj["sample_id"]] = {
                "score": float(obj["score"]), "label": obj["label"],
            }
    missing = [s.id for s in test_samples if s.id not in predictions]
    if missing:
        raise IncompletePredictions(missing)
    return predictions
