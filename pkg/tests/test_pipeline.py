from fractions import Fraction

import pytest

from labelpipe import synthetic
from labelpipe.corpus import export_corpus
from labelpipe.errors import ConfigError, OrderViolation
from labelpipe.pipeline import ARMS, Pipeline
from labelpipe.store import Store

SMALL_SPLIT = {"train_n": 60, "prompt_val_n": 20, "tune_val_n": 10,
               "test_n": 40, "seed": 0}


@pytest.fixture
def pipe(tmp_path):
    corpus_path = tmp_path / "corpus.jsonl"
    export_corpus(synthetic.make_planted_corpus(200, seed=1), corpus_path)
    pipeline = Pipeline(Store(tmp_path / "store"))
    pipeline.ingest(corpus_path, synthetic.SCHEMA)
    pipeline.update_config(split=SMALL_SPLIT, mock_noise=0.0, iterations=3,
                           train_config={"epochs": 6})
    pipeline.create_prompt(synthetic.POSITIVE, "Is the text topical?")
    return pipeline


TASK = synthetic.POSITIVE


class TestSetup:
    def test_ingest_records_run(self, pipe):
        runs = pipe.store.find_runs("ingest")
        assert len(runs) == 1
        assert runs[0]["outputs"]["n_samples"] == 200

    def test_tasks_from_schema(self, pipe):
        ids = [spec.task_id for spec, _ in pipe.tasks()]
        assert ids == synthetic.SCHEMA

    def test_splits_sized_and_disjoint(self, pipe):
        parts = pipe.splits(TASK)
        ids = [s.id for part in parts.values() for s in part]
        assert len(ids) == len(set(ids)) == 130
        assert len(parts["train"]) == 60

    def test_unknown_task(self, pipe):
        with pytest.raises(ConfigError):
            pipe.task("nope")

    def test_prompt_versions_increment(self, pipe):
        pipe.create_prompt(TASK, "Clarified wording.")
        assert pipe.prompt_versions(TASK) == [1, 2]
        assert pipe.prompt(TASK).version == 2
        assert pipe.prompt(TASK, 1).instructions == "Is the text topical?"


class TestValidate:
    def test_noise_free_mock_is_perfect(self, pipe):
        run = pipe.run_validate(TASK)
        art = pipe.store.get_artifact(run["outputs"]["report"])
        assert art["kind"] == "validation_report"
        assert art["metrics"]["f1"] == 1.0
        assert art["gate"]["passed"] is True
        assert len(art["labels"]) == 20

    def test_mock_noise_lowers_accuracy(self, pipe):
        pipe.update_config(mock_noise=0.2, mock_seed=4)
        run = pipe.run_validate(TASK)
        art = pipe.store.get_artifact(run["outputs"]["report"])
        # 20% symmetric flips on the 20-sample validation split.
        assert 0.55 <= art["metrics"]["accuracy"] <= 0.95

    def test_idempotent(self, pipe):
        first = pipe.run_validate(TASK)
        again = pipe.run_validate(TASK)
        assert again["run_id"] == first["run_id"]
        assert len(pipe.store.find_runs("validate")) == 1

    def test_gate_can_fail_without_raising(self, pipe):
        pipe.update_config(mock_noise=0.45, mock_seed=2, gate_f1=0.99)
        run = pipe.run_validate(TASK)
        art = pipe.store.get_artifact(run["outputs"]["report"])
        assert art["gate"]["passed"] is False


class TestGenerate:
    def test_requires_validation_first(self, pipe):
        with pytest.raises(OrderViolation):
            pipe.run_generate(TASK)

    def test_prompt_change_requires_new_validation(self, pipe):
        pipe.run_validate(TASK)
        pipe.create_prompt(TASK, "Rewritten instructions.")
        with pytest.raises(OrderViolation):
            pipe.run_generate(TASK)  # v2 never validated

    def test_three_iterations_per_sample(self, pipe):
        pipe.update_config(mock_noise=0.2, mock_seed=1)
        pipe.run_validate(TASK)
        run = pipe.run_generate(TASK)
        art = pipe.store.get_artifact(run["outputs"]["labels"])
        assert art["iterations"] == 3
        assert len(art["labels"]) == 60
        assert all(len(v) == 3 for v in art["iteration_labels"].values())
        # Binary labels, three draws: consistency is 1 or 2/3 only.
        assert set(map(tuple, art["consistency"].values())) <= \
            {(1, 1), (2, 3)}

    def test_single_iteration_all_unanimous(self, pipe):
        pipe.update_config(iterations=1, mock_noise=0.3)
        pipe.run_validate(TASK)
        run = pipe.run_generate(TASK)
        art = pipe.store.get_artifact(run["outputs"]["labels"])
        assert all(tuple(v) == (1, 1) for v in art["consistency"].values())

    def test_idempotent_and_cached(self, pipe):
        pipe.run_validate(TASK)
        first = pipe.run_generate(TASK)
        again = pipe.run_generate(TASK)
        assert again["run_id"] == first["run_id"]


class TestArmsData:
    def test_human250_strict_subset_of_human1000(self, pipe):
        pipe.update_config(human250_n=15)
        parts = pipe.splits(TASK)
        small, small_labels = pipe._arm_training_data(TASK, "human250", parts)
        full, full_labels = pipe._arm_training_data(TASK, "human1000", parts)
        small_ids = [s.id for s in small]
        assert len(small) == 15
        assert small_ids == [s.id for s in full[:15]]
        assert small_labels == full_labels[:15]

    def test_gpt_arm_uses_modal_labels(self, pipe):
        pipe.update_config(mock_noise=0.25, mock_seed=6)
        pipe.run_validate(TASK)
        pipe.run_generate(TASK)
        art = pipe.surrogate_labels(TASK)
        parts = pipe.splits(TASK)
        samples, labels = pipe._arm_training_data(TASK, "gpt1000", parts)
        assert {s.id: y for s, y in zip(samples, labels)} == art["labels"]

    def test_filtered_arm_keeps_unanimous_only(self, pipe):
        pipe.update_config(mock_noise=0.25, mock_seed=6)
        pipe.run_validate(TASK)
        pipe.run_generate(TASK)
        art = pipe.surrogate_labels(TASK)
        parts = pipe.splits(TASK)
        samples, _ = pipe._arm_training_data(TASK, "gpt1000_filtered", parts)
        unanimous = {sid for sid, (num, den) in art["consistency"].items()
                     if num == den}
        assert {s.id for s in samples} == unanimous
        assert len(unanimous) < 60  # noise guarantees some disagreement


class TestTrainEvaluate:
    def test_train_idempotent_with_provenance(self, pipe):
        first = pipe.run_train(TASK, "human1000")
        again = pipe.run_train(TASK, "human1000")
        assert again["run_id"] == first["run_id"]
        model = pipe.store.get_artifact(first["outputs"]["model"])
        assert model["provenance"]["arm"] == "human1000"
        assert model["positive_label"] == TASK

    def test_evaluate_student(self, pipe):
        run = pipe.run_evaluate(TASK, "human1000")
        art = pipe.store.get_artifact(run["outputs"]["report"])
        assert art["model"] == "builtin"
        assert len(art["predictions"]) == 40
        assert art["metrics"]["n"] == 40

    def test_evaluate_few_shot_uses_teacher(self, pipe):
        run = pipe.run_evaluate(TASK, "few_shot")
        art = pipe.store.get_artifact(run["outputs"]["report"])
        assert art["model"] == "teacher"
        assert art["metrics"]["f1"] == 1.0  # noise-free mock

    def test_run_arms_full_grid(self, pipe):
        pipe.update_config(mock_noise=0.1, mock_seed=3)
        pipe.run_validate(TASK)
        pipe.run_generate(TASK)
        run = pipe.run_arms(TASK)
        art = pipe.store.get_artifact(run["outputs"]["comparison"])
        assert art["kind"] == "arm_comparison"
        arms_seen = {row["arm"] for row in art["medians"]}
        assert arms_seen == set(ARMS)

    def test_consistency_ablation(self, pipe):
        pipe.update_config(mock_noise=0.25, mock_seed=6)
        pipe.run_validate(TASK)
        pipe.run_generate(TASK)
        run = pipe.run_consistency_ablation(TASK)
        art = pipe.store.get_artifact(run["outputs"]["ablation"])
        assert art["kind"] == "consistency_ablation"
        assert art["difference"] == pytest.approx(
            art["f1_without_noise"] - art["f1_with_noise"])


class TestDriftFiles:
    def test_exact_deltas(self, tmp_path):
        import json
        a = {"reports": [
            {"task_id": "t1", "accuracy": 0.80, "f1": 0.50,
             "precision": 0.6, "recall": 0.4},
            {"task_id": "t2", "accuracy": 0.90, "f1": 0.70,
             "precision": 0.7, "recall": 0.7}]}
        b = {"reports": [
            {"task_id": "t1", "accuracy": 0.81, "f1": 0.53,
             "precision": 0.6, "recall": 0.4},
            {"task_id": "t2", "accuracy": 0.91, "f1": 0.71,
             "precision": 0.7, "recall": 0.7}]}
        pa = tmp_path / "a.json"
        pb = tmp_path / "b.json"
        pa.write_text(json.dumps(a))
        pb.write_text(json.dumps(b))
        drift = Pipeline.drift_from_report_files(pa, pb)
        assert drift.means["accuracy"] == Fraction("0.01")
        assert drift.means["f1"] == Fraction("0.02")
