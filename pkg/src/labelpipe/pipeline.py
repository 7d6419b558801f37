"""Orchestrates the four-step workflow over the project store.

Steps and their enforced order: validate a prompt's few-shot labels against
the human-labeled prompt-validation split; generate surrogate labels for
the training split (requires a validation run for the same prompt);
train students on an arm's labels; evaluate on the held-out test split.
Every run manifest records input content hashes, so re-invoking a step
with unchanged inputs is a no-op and any report traces back to exact
corpus bytes, split seed, prompt version, and train config.
"""

from __future__ import annotations

import json
from fractions import Fraction

from . import consistency as cons
from . import corpus as corpus_mod
from . import trainer as trainer_mod
from .annotator import (
    AnnotationCache,
    HttpProvider,
    MockProvider,
    PromptVersion,
    ProviderConfig,
    annotate,
    group_by_sample,
    load_prompt,
    save_prompt,
)
from .errors import ConfigError, MissingRun, OrderViolation
from .evaluator import (
    arm_comparison,
    compute_metrics,
    drift_compare,
    metrics_from_counts,
)
from .store import Store, canonical_json_bytes, content_hash

ARMS = ("few_shot", "human250", "human1000", "gpt1000")

DEFAULT_CONFIG = {
    "schema": [],
    "split": {"train_n": 1000, "prompt_val_n": 250, "tune_val_n": 250,
              "test_n": 1000, "seed": 0},
    "provider": {},
    "offline": True,
    "mock_noise": 0.0,
    "mock_seed": 0,
    "iterations": 3,
    "consistency_temperature": 0.7,
    "validation_temperature": 0.0,
    "gate_f1": 0.5,
    "human250_n": 250,
    "feature_spec": {},
    "train_config": {},
}


class Pipeline:
    def __init__(self, store: Store):
        self.store = store

    # --- configuration ----------------------------------------------------

    @property
    def config(self) -> dict:
        cfg = dict(DEFAULT_CONFIG)
        cfg.update(self.store.config)
        return cfg

    def update_config(self, **kwargs) -> None:
        cfg = self.store.config
        cfg.update(kwargs)
        self.store.set_config(cfg)

    def _config_hash(self, *keys) -> str:
        cfg = self.config
        return content_hash(canonical_json_bytes({k: cfg.get(k) for k in keys}))

    # --- step 0: ingest + split -------------------------------------------

    def ingest(self, corpus_path, schema) -> dict:
        digest = self.store.put_corpus_file(corpus_path)
        self.update_config(corpus_hash=digest, schema=list(schema))
        samples = corpus_mod.ingest_corpus(self.store.corpus_path(digest))
        return self.store.record_run(
            "ingest", "", {"corpus": digest},
            {"n_samples": len(samples), "schema": list(schema)})

    def _corpus(self):
        digest = self.config.get("corpus_hash")
        if not digest:
            raise ConfigError("no corpus ingested; run ingest first")
        return digest, corpus_mod.ingest_corpus(self.store.corpus_path(digest))

    def _plan(self) -> corpus_mod.SplitPlan:
        return corpus_mod.SplitPlan(**self.config["split"])

    def tasks(self):
        _, samples = self._corpus()
        schema = self.config.get("schema") or []
        if not schema:
            raise ConfigError("no schema configured")
        return corpus_mod.binarize(schema, samples)

    def task(self, task_id: str):
        for spec, samples in self.tasks():
            if spec.task_id == task_id:
                return spec, samples
        raise ConfigError(f"unknown task {task_id!r}")

    def splits(self, task_id: str) -> dict:
        spec, samples = self.task(task_id)
        parts = corpus_mod.split(samples, self._plan())
        digest, _ = self._corpus()
        self.store.record_run(
            "split", task_id,
            {"corpus": digest, "plan": self._config_hash("split")},
            {"manifest": self.store.put_artifact(
                corpus_mod.split_manifest(parts))})
        return parts

    # --- prompts ----------------------------------------------------------

    def create_prompt(self, task_id: str, instructions: str,
                      lexicon: dict | None = None) -> PromptVersion:
        spec, _ = self.task(task_id)
        existing = self.prompt_versions(task_id)
        version = (existing[-1] + 1) if existing else 1
        lexicon = lexicon or {spec.positive_label: "YES",
                              spec.negative_label: "NO"}
        prompt = PromptVersion(prompt_id=task_id, version=version,
                               instructions=instructions,
                               label_lexicon=lexicon)
        save_prompt(prompt, self.store.prompts_dir)
        return prompt

    def prompt_versions(self, task_id: str) -> list[int]:
        from .annotator import list_prompt_versions
        return list_prompt_versions(self.store.prompts_dir, task_id)

    def prompt(self, task_id: str, version: int | None = None) -> PromptVersion:
        versions = self.prompt_versions(task_id)
        if not versions:
            raise ConfigError(f"no prompt versions for task {task_id!r}")
        version = version or versions[-1]
        if version not in versions:
            raise ConfigError(f"prompt {task_id!r} has no version {version}")
        return load_prompt(self.store.prompts_dir, task_id, version)

    # --- provider ----------------------------------------------------------

    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(**self.config.get("provider", {}))

    def _annotate(self, task_spec, task_samples, subset, prompt,
                  iterations, temperature):
        cfg = self.config
        pcfg = self.provider_config()
        pcfg = ProviderConfig(**{**pcfg.__dict__, "temperature": temperature})
        if cfg["offline"]:
            provider = MockProvider(
                gold={s.id: s.gold for s in task_samples},
                lexicon=prompt.label_lexicon,
                noise=cfg["mock_noise"], seed=cfg["mock_seed"])
        else:
            provider = HttpProvider(pcfg)
        cache = AnnotationCache(self.store.cache_path)
        return annotate(subset, task_spec, prompt, provider, pcfg,
                        iterations=iterations, cache=cache)

    # --- step 1: validate --------------------------------------------------

    def run_validate(self, task_id: str, prompt_version: int | None = None) -> dict:
        spec, task_samples = self.task(task_id)
        prompt = self.prompt(task_id, prompt_version)
        parts = self.splits(task_id)
        inputs = self._step_inputs(task_id, prompt)
        existing = self.store.get_run(Store.run_id("validate", task_id, inputs))
        if existing and existing["status"] == "done":
            return existing

        result = self._annotate(spec, task_samples, parts["prompt_val"],
                                prompt, iterations=1,
                                temperature=self.config["validation_temperature"])
        labels = {a.sample_id: a.label for a in result.annotations}
        gold = {s.id: s.gold for s in parts["prompt_val"]}
        # Unparseable slots count as wrong: score them as the negative label
        # when gold is positive and vice versa is unknowable, so use a
        # sentinel that never matches.
        preds = {sid: (lab if lab is not None else "__unparseable__")
                 for sid, lab in labels.items()}
        report = compute_metrics(preds, gold, spec.positive_label,
                                 task_id=task_id, model="teacher",
                                 arm="few_shot")
        gate_f1 = Fraction(str(self.config["gate_f1"]))
        artifact = {
            "kind": "validation_report",
            "task_id": task_id,
            "prompt_version": prompt.version,
            "metrics": report.to_json_obj(),
            "labels": {sid: labels[sid] for sid in sorted(labels)},
            "gate": {"min_f1": float(gate_f1),
                     "passed": report.metric("f1") >= gate_f1},
            "token_usage": result.ledger.to_json_obj(),
        }
        return self.store.record_run(
            "validate", task_id, inputs,
            {"report": self.store.put_artifact(artifact)})

    def _step_inputs(self, task_id: str, prompt: PromptVersion) -> dict:
        digest, _ = self._corpus()
        return {
            "corpus": digest,
            "plan": self._config_hash("split"),
            "prompt": prompt.content_hash(),
            "annotation": self._config_hash(
                "offline", "mock_noise", "mock_seed", "iterations",
                "consistency_temperature", "validation_temperature",
                "provider"),
        }

    # --- step 2: generate surrogate labels ---------------------------------

    def run_generate(self, task_id: str,
                     prompt_version: int | None = None) -> dict:
        spec, task_samples = self.task(task_id)
        prompt = self.prompt(task_id, prompt_version)
        parts = self.splits(task_id)
        inputs = self._step_inputs(task_id, prompt)
        validated = self.store.get_run(
            Store.run_id("validate", task_id, inputs))
        if not validated or validated["status"] != "done":
            raise OrderViolation(
                f"generate requires a completed validation run for task "
                f"{task_id!r} with prompt v{prompt.version}")
        existing = self.store.get_run(Store.run_id("generate", task_id, inputs))
        if existing and existing["status"] == "done":
            return existing

        iterations = int(self.config["iterations"])
        result = self._annotate(
            spec, task_samples, parts["train"], prompt,
            iterations=iterations,
            temperature=self.config["consistency_temperature"])
        grouped = group_by_sample(result.annotations)
        records, excluded = cons.build_records(grouped)
        artifact = {
            "kind": "surrogate_labels",
            "task_id": task_id,
            "prompt_version": prompt.version,
            "iterations": iterations,
            "labels": {r.sample_id: r.modal for r in records},
            "consistency": {r.sample_id: [r.consistency.numerator,
                                          r.consistency.denominator]
                            for r in records},
            "iteration_labels": {r.sample_id: list(r.labels)
                                 for r in records},
            "excluded": sorted(excluded),
            "token_usage": result.ledger.to_json_obj(),
        }
        return self.store.record_run(
            "generate", task_id, inputs,
            {"labels": self.store.put_artifact(artifact)})

    def surrogate_labels(self, task_id: str,
                         prompt_version: int | None = None) -> dict:
        prompt = self.prompt(task_id, prompt_version)
        inputs = self._step_inputs(task_id, prompt)
        run = self.store.get_run(Store.run_id("generate", task_id, inputs))
        if not run or run["status"] != "done":
            raise MissingRun(f"generate for task {task_id!r}")
        return self.store.get_artifact(run["outputs"]["labels"])

    # --- steps 3 + 4: train and test --------------------------------------

    def _feature_spec(self) -> trainer_mod.FeatureSpec:
        obj = dict(self.config.get("feature_spec", {}))
        if "n_gram_range" in obj:
            obj["n_gram_range"] = tuple(obj["n_gram_range"])
        return trainer_mod.FeatureSpec(**obj)

    def _train_config(self, seed: int | None = None) -> trainer_mod.TrainConfig:
        obj = dict(self.config.get("train_config", {}))
        if seed is not None:
            obj["seed"] = seed
        return trainer_mod.TrainConfig(**obj)

    def _arm_training_data(self, task_id: str, arm: str, parts: dict):
        """(samples, labels) for one training arm."""
        train = parts["train"]
        if arm == "human1000":
            return train, [s.gold for s in train]
        if arm == "human250":
            n = int(self.config["human250_n"])
            subset = train[:n]  # strict subset of the human-1000 arm
            return subset, [s.gold for s in subset]
        if arm in ("gpt1000", "gpt1000_filtered"):
            art = self.surrogate_labels(task_id)
            labels_map = dict(art["labels"])
            if arm == "gpt1000_filtered":
                keep = {sid for sid, (num, den) in art["consistency"].items()
                        if num == den}
                labels_map = {sid: lab for sid, lab in labels_map.items()
                              if sid in keep}
            samples = [s for s in train if s.id in labels_map]
            return samples, [labels_map[s.id] for s in samples]
        raise ConfigError(f"unknown training arm {arm!r}")

    def run_train(self, task_id: str, arm: str,
                  seed: int | None = None) -> dict:
        spec, _ = self.task(task_id)
        parts = self.splits(task_id)
        samples, labels = self._arm_training_data(task_id, arm, parts)
        config = self._train_config(seed)
        inputs = {
            "corpus": self._corpus()[0],
            "plan": self._config_hash("split"),
            "arm": arm,
            "train_config": content_hash(canonical_json_bytes(
                config.__dict__)),
            "feature_spec": self._config_hash("feature_spec"),
            "labels": content_hash(canonical_json_bytes(
                {s.id: y for s, y in zip(samples, labels)})),
        }
        existing = self.store.get_run(Store.run_id("train", task_id, inputs))
        if existing and existing["status"] == "done":
            return existing
        model = trainer_mod.train(
            samples, labels, self._feature_spec(), config,
            provenance={"positive_label": spec.positive_label,
                        "task_id": task_id, "arm": arm,
                        "labels_hash": inputs["labels"]})
        artifact = {"kind": "model", **model.to_json_obj()}
        return self.store.record_run(
            "train", task_id, inputs,
            {"model": self.store.put_artifact(artifact)})

    def run_evaluate(self, task_id: str, arm: str,
                     seed: int | None = None) -> dict:
        spec, task_samples = self.task(task_id)
        parts = self.splits(task_id)
        gold = {s.id: s.gold for s in parts["test"]}

        if arm == "few_shot":
            prompt = self.prompt(task_id)
            inputs = self._step_inputs(task_id, prompt)
            inputs["arm"] = arm
            existing = self.store.get_run(
                Store.run_id("evaluate", task_id, inputs))
            if existing and existing["status"] == "done":
                return existing
            result = self._annotate(
                spec, task_samples, parts["test"], prompt, iterations=1,
                temperature=self.config["validation_temperature"])
            preds = {a.sample_id: (a.label or "__unparseable__")
                     for a in result.annotations}
            scores = {sid: (1.0 if lab == spec.positive_label else 0.0)
                      for sid, lab in preds.items()}
            model_name = "teacher"
        else:
            train_run = self.run_train(task_id, arm, seed)
            inputs = dict(train_run["inputs"])
            inputs["arm"] = arm
            inputs["eval"] = "test"
            existing = self.store.get_run(
                Store.run_id("evaluate", task_id, inputs))
            if existing and existing["status"] == "done":
                return existing
            model = trainer_mod.ModelArtifact.from_json_obj(
                self.store.get_artifact(train_run["outputs"]["model"]))
            scored = trainer_mod.predict_many(model, parts["test"])
            preds = {sid: label for sid, (score, label) in scored.items()}
            scores = {sid: score for sid, (score, label) in scored.items()}
            model_name = "builtin"

        report = compute_metrics(preds, gold, spec.positive_label,
                                 task_id=task_id, model=model_name, arm=arm)
        artifact = {
            "kind": "metrics_report",
            "task_id": task_id, "arm": arm, "model": model_name,
            "metrics": report.to_json_obj(),
            "predictions": {sid: preds[sid] for sid in sorted(preds)},
            "scores": {sid: scores[sid] for sid in sorted(scores)},
        }
        return self.store.record_run(
            "evaluate", task_id, inputs,
            {"report": self.store.put_artifact(artifact)})

    def run_arms(self, task_id: str, seed: int | None = None) -> dict:
        """All four arms on the same test split, plus the comparison grid."""
        reports = []
        run_ids = {}
        for arm in ARMS:
            run = self.run_evaluate(task_id, arm, seed)
            run_ids[arm] = run["run_id"]
            art = self.store.get_artifact(run["outputs"]["report"])
            m = art["metrics"]
            reports.append(metrics_from_counts(
                m["tp"], m["fp"], m["fn"], m["tn"], task_id=task_id,
                model=art["model"], arm=arm))
        comparison = arm_comparison(reports)
        artifact = {"kind": "arm_comparison", "task_id": task_id,
                    **comparison.to_json_obj()}
        inputs = {"evaluations": content_hash(canonical_json_bytes(run_ids))}
        return self.store.record_run(
            "arms", task_id, inputs,
            {"comparison": self.store.put_artifact(artifact)})

    # --- ablations ---------------------------------------------------------

    def run_consistency_ablation(self, task_id: str,
                                 seed: int | None = None) -> dict:
        """Student on all surrogate labels vs consistency-filtered ones."""
        with_noise = self.run_evaluate(task_id, "gpt1000", seed)
        without_noise = self.run_evaluate(task_id, "gpt1000_filtered", seed)
        f1_with = self.store.get_artifact(
            with_noise["outputs"]["report"])["metrics"]["f1"]
        f1_without = self.store.get_artifact(
            without_noise["outputs"]["report"])["metrics"]["f1"]
        artifact = {
            "kind": "consistency_ablation", "task_id": task_id,
            "f1_with_noise": f1_with, "f1_without_noise": f1_without,
            "difference": f1_without - f1_with,
        }
        inputs = {"with": with_noise["run_id"],
                  "without": without_noise["run_id"]}
        return self.store.record_run(
            "ablate", task_id, inputs,
            {"ablation": self.store.put_artifact(artifact)})

    # --- drift -------------------------------------------------------------

    @staticmethod
    def drift_from_report_files(path_a, path_b):
        """Paired drift deltas from two JSON report files.

        Each file: {"reports": [{"task_id", "accuracy", "f1", "precision",
        "recall"}, ...]}.  Metric values parse as exact decimals.
        """
        def load(path):
            from .evaluator import metrics_from_values
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh, parse_float=Fraction)
            return [metrics_from_values(
                r["task_id"], r.get("model", ""), r.get("arm", ""),
                r["accuracy"], r["f1"], r["precision"], r["recall"])
                for r in data["reports"]]
        return drift_compare(load(path_a), load(path_b))
