import json

import pytest
from click.testing import CliRunner

from labelpipe import synthetic
from labelpipe.cli import main
from labelpipe.corpus import export_corpus

TASK = synthetic.POSITIVE


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus_path = root / "corpus.jsonl"
    export_corpus(synthetic.make_planted_corpus(200, seed=3), corpus_path)
    config_path = root / "config.json"
    config_path.write_text(json.dumps({
        "split": {"train_n": 60, "prompt_val_n": 20, "tune_val_n": 10,
                  "test_n": 40, "seed": 0},
        "mock_noise": 0.1, "mock_seed": 1,
        "train_config": {"epochs": 4},
    }))
    return {"root": root, "corpus": corpus_path, "config": config_path,
            "store": str(root / "store")}


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def invoke(runner, workspace, *args, expect=0, config=True):
    argv = ["--store", workspace["store"], "--offline"]
    if config:
        argv += ["--config", str(workspace["config"])]
    argv += list(args)
    result = runner.invoke(main, argv)
    assert result.exit_code == expect, result.output
    return result


class TestWorkflow:
    """Ordered end-to-end walk through the subcommands."""

    def test_01_ingest(self, runner, workspace):
        result = invoke(runner, workspace, "ingest", str(workspace["corpus"]),
                        "--schema", ",".join(synthetic.SCHEMA))
        assert json.loads(result.output)["outputs"]["n_samples"] == 200

    def test_02_split(self, runner, workspace):
        result = invoke(runner, workspace, "split", "--task", TASK)
        assert json.loads(result.output) == {
            "train": 60, "prompt_val": 20, "tune_val": 10, "test": 40}

    def test_03_generate_before_validate_fails(self, runner, workspace):
        # No prompt exists yet, so the ordering guard trips at the first
        # missing prerequisite.
        result = invoke(runner, workspace, "generate", "--task", TASK,
                        expect=1)
        assert "no prompt versions" in result.output

    def test_04_validate(self, runner, workspace):
        result = invoke(runner, workspace, "validate", "--task", TASK,
                        "--instructions", "Is the text topical?")
        report = json.loads(result.output)
        assert report["kind"] == "validation_report"
        assert report["gate"]["passed"] is True

    def test_05_generate(self, runner, workspace):
        result = invoke(runner, workspace, "generate", "--task", TASK)
        out = json.loads(result.output)
        assert out["n_labels"] == 60

    def test_06_train(self, runner, workspace):
        result = invoke(runner, workspace, "train", "--task", TASK,
                        "--arm", "gpt1000")
        assert json.loads(result.output)["status"] == "done"

    def test_07_evaluate(self, runner, workspace):
        result = invoke(runner, workspace, "evaluate", "--task", TASK,
                        "--arm", "gpt1000")
        metrics = json.loads(result.output)
        assert metrics["n"] == 40
        assert "f1_display" in metrics

    def test_08_arms(self, runner, workspace):
        result = invoke(runner, workspace, "arms", "--task", TASK)
        art = json.loads(result.output)
        assert len(art["medians"]) == 4

    def test_09_ablate_consistency(self, runner, workspace):
        result = invoke(runner, workspace, "ablate-consistency",
                        "--task", TASK)
        art = json.loads(result.output)
        assert set(art) >= {"f1_with_noise", "f1_without_noise", "difference"}

    def test_10_review_export(self, runner, workspace):
        result = invoke(runner, workspace, "review", "export", "--task", TASK)
        out = json.loads(result.output)
        assert out["task"] == TASK
        assert (workspace["root"] / "store").exists()


class TestStandalone:
    def test_drift(self, runner, workspace, tmp_path):
        a = {"reports": [{"task_id": "t", "accuracy": 0.8, "f1": 0.5,
                          "precision": 0.6, "recall": 0.4}]}
        b = {"reports": [{"task_id": "t", "accuracy": 0.81, "f1": 0.52,
                          "precision": 0.6, "recall": 0.4}]}
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        pa.write_text(json.dumps(a))
        pb.write_text(json.dumps(b))
        result = invoke(runner, workspace, "drift", str(pa), str(pb),
                        config=False)
        out = json.loads(result.output)
        assert out["means"]["f1"] == pytest.approx(0.02)

    def test_drift_task_mismatch_exit_1(self, runner, workspace, tmp_path):
        a = {"reports": [{"task_id": "t1", "accuracy": 1, "f1": 1,
                          "precision": 1, "recall": 1}]}
        b = {"reports": [{"task_id": "t2", "accuracy": 1, "f1": 1,
                          "precision": 1, "recall": 1}]}
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        pa.write_text(json.dumps(a))
        pb.write_text(json.dumps(b))
        invoke(runner, workspace, "drift", str(pa), str(pb),
               config=False, expect=1)

    def test_cost(self, runner, workspace, tmp_path):
        scenarios = {"scenarios": [
            {"name": "llm", "kind": "llm", "n_batches": 620000,
             "input_tokens_per_batch": 1000, "output_tokens_per_batch": 150,
             "rate_in": "0.00001", "rate_out": "0.00003"}]}
        path = tmp_path / "s.json"
        path.write_text(json.dumps(scenarios))
        out_path = tmp_path / "report.json"
        result = invoke(runner, workspace, "cost", str(path),
                        "--out", str(out_path), config=False)
        assert "8990.00" in result.output
        assert json.loads(out_path.read_text())["rows"][0]["total"] == \
            "8990.00"

    def test_missing_corpus_exit_1(self, runner, tmp_path):
        runner_ = CliRunner()
        result = runner_.invoke(main, [
            "--store", str(tmp_path / "empty-store"), "--offline",
            "split", "--task", TASK])
        assert result.exit_code == 1
        assert "ingest" in result.output

    def test_unknown_arm_exit_2_usage(self, runner, workspace):
        result = runner.invoke(main, [
            "--store", workspace["store"], "evaluate", "--task", TASK,
            "--arm", "bogus"])
        assert result.exit_code == 2  # click usage error
