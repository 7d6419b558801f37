import json
import math
import random
from fractions import Fraction

import numpy as np
import pytest

from labelpipe import trainer
from labelpipe.corpus import TextSample
from labelpipe.errors import (
    DegenerateLabels,
    IncompletePredictions,
    NonZeroExit,
)
from labelpipe.evaluator import compute_metrics


def texts_to_samples(texts, prefix="s"):
    return [TextSample(id=f"{prefix}{i:04d}", text=t)
            for i, t in enumerate(texts)]


def separable_data(n, seed=0):
    """Positive texts contain 'alpha', negatives never do."""
    rng = random.Random(seed)
    filler = [f"w{i}" for i in range(50)]
    texts, labels = [], []
    for i in range(n):
        words = [rng.choice(filler) for _ in range(6)]
        if i % 2 == 0:
            words.insert(rng.randrange(len(words)), "alpha")
            labels.append("pos")
        else:
            labels.append("neg")
        texts.append(" ".join(words))
    return texts_to_samples(texts), labels


class TestFeaturize:
    SPEC = trainer.FeatureSpec()

    def test_empty_text_zero_vector(self):
        assert trainer.featurize("", self.SPEC) == {}

    def test_unit_norm(self):
        vec = trainer.featurize("the cat sat on the mat", self.SPEC)
        norm = math.sqrt(sum(v * v for v in vec.values()))
        assert abs(norm - 1.0) < 1e-12

    def test_two_tokens_three_slots(self):
        # "a b" with 1-2 grams: unigrams a, b plus bigram "a b".
        vec = trainer.featurize("a b", self.SPEC)
        assert len(vec) == 3

    def test_deterministic_across_calls(self):
        a = trainer.featurize("some stable text here", self.SPEC)
        b = trainer.featurize("some stable text here", self.SPEC)
        assert a == b

    def test_lowercase_folding(self):
        spec = trainer.FeatureSpec(lowercase=True)
        assert trainer.featurize("Cat CAT", spec) == \
            trainer.featurize("cat cat", spec)

    def test_tf_idf_downweights_common_tokens(self):
        spec = trainer.FeatureSpec(tf_idf=True, n_gram_range=(1, 1))
        idf = trainer.fit_idf(["the cat", "the dog", "the bird"], spec)
        slot_the = trainer._hash_slot("the", spec.hash_dim)
        slot_cat = trainer._hash_slot("cat", spec.hash_dim)
        assert idf[slot_the] < idf[slot_cat]

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            trainer.FeatureSpec(hash_dim=1000)  # not a power of two
        with pytest.raises(ValueError):
            trainer.FeatureSpec(n_gram_range=(2, 1))


class TestTrain:
    def test_separable_reaches_perfect_f1(self):
        samples, labels = separable_data(40)
        model = trainer.train(samples, labels, trainer.FeatureSpec(),
                              trainer.TrainConfig(epochs=30, seed=1,
                                                  learning_rate=0.2),
                              provenance={"positive_label": "pos"})
        preds = {s.id: trainer.predict(model, s.text)[1] for s in samples}
        gold = {s.id: y for s, y in zip(samples, labels)}
        rep = compute_metrics(preds, gold, "pos")
        assert rep.metric("f1") == 1

    def test_coin_flip_labels_near_chance(self):
        rng = random.Random(9)
        samples, _ = separable_data(1000, seed=9)
        labels = [rng.choice(["pos", "neg"]) for _ in samples]
        model = trainer.train(samples, labels, trainer.FeatureSpec(),
                              trainer.TrainConfig(epochs=2, seed=2),
                              provenance={"positive_label": "pos"})
        holdout, _ = separable_data(1000, seed=10)
        hold_labels = [rng.choice(["pos", "neg"]) for _ in holdout]
        preds = {s.id: trainer.predict(model, s.text)[1] for s in holdout}
        gold = {s.id: y for s, y in zip(holdout, hold_labels)}
        rep = compute_metrics(preds, gold, "pos")
        assert abs(float(rep.metric("accuracy")) - 0.5) < 0.08

    def test_loss_decreases(self):
        samples, labels = separable_data(60)
        model = trainer.train(samples, labels, trainer.FeatureSpec(),
                              trainer.TrainConfig(epochs=6, seed=0))
        assert model.epoch_losses[-1] < model.epoch_losses[0]

    def test_single_class_rejected(self):
        samples, _ = separable_data(10)
        with pytest.raises(DegenerateLabels):
            trainer.train(samples, ["pos"] * 10, trainer.FeatureSpec(),
                          trainer.TrainConfig())

    def test_bit_identical_artifacts(self):
        samples, labels = separable_data(30)
        kwargs = dict(spec=trainer.FeatureSpec(tf_idf=True),
                      config=trainer.TrainConfig(seed=5, l2=0.001))
        a = trainer.train(samples, labels, kwargs["spec"], kwargs["config"])
        b = trainer.train(samples, labels, kwargs["spec"], kwargs["config"])
        assert a.to_bytes() == b.to_bytes()

    def test_artifact_round_trip(self):
        samples, labels = separable_data(30)
        model = trainer.train(samples, labels, trainer.FeatureSpec(),
                              trainer.TrainConfig(seed=3))
        back = trainer.ModelArtifact.from_json_obj(
            json.loads(model.to_bytes()))
        assert back.to_bytes() == model.to_bytes()
        for s in samples[:5]:
            assert trainer.predict(back, s.text) == \
                trainer.predict(model, s.text)

    def test_seed_changes_model(self):
        samples, labels = separable_data(30)
        a = trainer.train(samples, labels, trainer.FeatureSpec(),
                          trainer.TrainConfig(seed=1))
        b = trainer.train(samples, labels, trainer.FeatureSpec(),
                          trainer.TrainConfig(seed=2))
        assert a.to_bytes() != b.to_bytes()

    def test_class_weighting_boosts_minority_recall(self):
        rng = random.Random(4)
        filler = [f"w{i}" for i in range(80)]
        samples, labels = [], []
        for i in range(400):
            words = [rng.choice(filler) for _ in range(8)]
            if i % 10 == 0:
                words[0] = "rare"
                # Minority positives share a marker but also plenty of
                # background overlap with negatives.
                labels.append("pos")
            else:
                labels.append("neg")
            samples.append(" ".join(words))
        samples = texts_to_samples(samples)
        gold = {s.id: y for s, y in zip(samples, labels)}

        def recall(weighting):
            model = trainer.train(
                samples, labels, trainer.FeatureSpec(),
                trainer.TrainConfig(epochs=2, seed=0,
                                    class_weighting=weighting),
                provenance={"positive_label": "pos"})
            preds = {s.id: trainer.predict(model, s.text)[1] for s in samples}
            return compute_metrics(preds, gold, "pos").metric("recall")

        assert recall(True) >= recall(False)


class TestGradient:
    def test_finite_difference_agreement(self):
        # 100 random instances; relative error of the analytic gradient
        # against central differences stays below 1e-4.
        rng = random.Random(77)
        spec = trainer.FeatureSpec(hash_dim=2 ** 10)
        for _ in range(100):
            n = rng.randrange(2, 6)
            vectors = []
            targets = []
            for _ in range(n):
                text = " ".join(rng.choice("abcdefghij") for _ in range(6))
                vectors.append(trainer.featurize(text, spec))
                targets.append(float(rng.randrange(2)))
            weights = np.zeros(spec.hash_dim)
            live = sorted({s for v in vectors for s in v})
            for slot in live:
                weights[slot] = rng.uniform(-1, 1)
            bias = rng.uniform(-1, 1)
            l2 = rng.choice([0.0, 0.01])

            _, grad_w, grad_b = trainer.logistic_loss_and_grad(
                weights, bias, vectors, targets, l2)
            h = 1e-6
            for slot in live[:3]:
                w_hi = weights.copy(); w_hi[slot] += h
                w_lo = weights.copy(); w_lo[slot] -= h
                hi, _, _ = trainer.logistic_loss_and_grad(
                    w_hi, bias, vectors, targets, l2)
                lo, _, _ = trainer.logistic_loss_and_grad(
                    w_lo, bias, vectors, targets, l2)
                numeric = (hi - lo) / (2 * h)
                denom = max(abs(numeric), abs(grad_w[slot]), 1e-8)
                assert abs(numeric - grad_w[slot]) / denom < 1e-4
            hi, _, _ = trainer.logistic_loss_and_grad(
                weights, bias + h, vectors, targets, l2)
            lo, _, _ = trainer.logistic_loss_and_grad(
                weights, bias - h, vectors, targets, l2)
            numeric = (hi - lo) / (2 * h)
            denom = max(abs(numeric), abs(grad_b), 1e-8)
            assert abs(numeric - grad_b) / denom < 1e-4


class TestGridSearch:
    def test_full_grid_visited(self):
        samples, labels = separable_data(60)
        val, val_labels = separable_data(30, seed=5)
        config, model, table = trainer.grid_search(
            samples, labels, val, val_labels, trainer.FeatureSpec(),
            positive_label="pos")
        assert len(table) == 18
        assert all(cell["status"] == "ok" for cell in table)
        assert model.positive_label == "pos"

    def test_tie_break_keeps_earliest(self):
        samples, labels = separable_data(60)
        val, val_labels = separable_data(30, seed=5)
        config, _, table = trainer.grid_search(
            samples, labels, val, val_labels, trainer.FeatureSpec(),
            positive_label="pos")
        best_f1 = max(cell["f1"] for cell in table)
        first = next(cell for cell in table if cell["f1"] == best_f1)
        assert (config.learning_rate, config.batch_size, config.epochs) == \
            (first["learning_rate"], first["batch_size"], first["epochs"])

    def test_degenerate_val(self):
        samples, labels = separable_data(60)
        val, _ = separable_data(10, seed=5)
        with pytest.raises(DegenerateLabels):
            trainer.grid_search(samples, labels, val, ["pos"] * 10,
                                trainer.FeatureSpec())


MEMORIZE_SCRIPT = """\
import json, sys
train, val, test, config, out = sys.argv[1:6]
lookup = {}
for path in (train, val):
    for line in open(path):
        obj = json.loads(line)
        lookup[obj["text"]] = obj.get("label")
with open(out, "w") as fh:
    for line in open(test):
        obj = json.loads(line)
        label = lookup.get(obj["text"], "neg")
        fh.write(json.dumps({"sample_id": obj["id"], "score": 1.0,
                             "label": label}) + "\\n")
"""

SKIP_ONE_SCRIPT = """\
import json, sys
train, val, test, config, out = sys.argv[1:6]
lines = open(test).readlines()
with open(out, "w") as fh:
    for line in lines[1:]:
        obj = json.loads(line)
        fh.write(json.dumps({"sample_id": obj["id"], "score": 0.5,
                             "label": "neg"}) + "\\n")
"""


class TestExternalTrainer:
    def _run(self, tmp_path, script, train_n=20, test_n=10):
        script_path = tmp_path / "trainer.py"
        script_path.write_text(script)
        samples, labels = separable_data(train_n)
        test, test_labels = separable_data(test_n, seed=0)
        preds = trainer.external_train(
            samples, labels, samples[:4], labels[:4], test,
            ["python3", str(script_path)], tmp_path / "work")
        return preds, test, test_labels

    def test_memorizing_trainer_round_trip(self, tmp_path):
        preds, test, test_labels = self._run(tmp_path, MEMORIZE_SCRIPT)
        gold = {s.id: y for s, y in zip(test, test_labels)}
        labels = {sid: p["label"] for sid, p in preds.items()}
        rep = compute_metrics(labels, gold, "pos")
        assert rep.metric("f1") == 1  # test seed matches train seed

    def test_missing_prediction_detected(self, tmp_path):
        with pytest.raises(IncompletePredictions) as err:
            self._run(tmp_path, SKIP_ONE_SCRIPT)
        assert len(err.value.missing_ids) == 1

    def test_nonzero_exit(self, tmp_path):
        with pytest.raises(NonZeroExit) as err:
            self._run(tmp_path, "import sys; sys.exit(3)")
        assert err.value.code == 3

    def test_majority_class_baseline(self, tmp_path):
        script = """\
import json, sys
train, val, test, config, out = sys.argv[1:6]
from collections import Counter
counts = Counter(json.loads(l)["label"] for l in open(train))
majority = counts.most_common(1)[0][0]
with open(out, "w") as fh:
    for line in open(test):
        obj = json.loads(line)
        fh.write(json.dumps({"sample_id": obj["id"], "score": 0.0,
                             "label": majority}) + "\\n")
"""
        script_path = tmp_path / "maj.py"
        script_path.write_text(script)
        # 85/15 imbalance: accuracy 0.85, positive-class F1 0.
        samples, labels = separable_data(40)
        labels = ["neg"] * 34 + ["pos"] * 6
        test = samples[:20]
        gold = {s.id: ("neg" if i < 17 else "pos")
                for i, s in enumerate(test)}
        preds = trainer.external_train(
            samples, labels, samples[:4], labels[:4], test,
            ["python3", str(script_path)], tmp_path / "work")
        labels_out = {sid: p["label"] for sid, p in preds.items()}
        rep = compute_metrics(labels_out, gold, "pos")
        assert rep.metric("accuracy") == Fraction(17, 20)
        assert rep.metric("f1") == 0
