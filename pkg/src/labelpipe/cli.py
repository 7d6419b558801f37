"""Command-line entry points for the annotation-to-classifier pipeline.

Exit codes: 0 success; 1 validation or contract failure; 2 environment or
provider failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import cost as cost_mod
from . import review as review_mod
from .errors import (
    AuthMissing,
    ConfigError,
    LabelPipeError,
    ProviderUnreachable,
)
from .pipeline import ARMS, Pipeline
from .store import Store


def _pipeline(ctx) -> Pipeline:
    store = Store(ctx.obj["store"])
    pipe = Pipeline(store)
    updates = {}
    if ctx.obj.get("config_file"):
        with open(ctx.obj["config_file"], encoding="utf-8") as fh:
            updates.update(json.load(fh))
    if ctx.obj.get("seed") is not None:
        split = dict(pipe.config["split"])
        split.update(updates.get("split", {}))
        split["seed"] = ctx.obj["seed"]
        updates["split"] = split
    if ctx.obj.get("offline"):
        updates["offline"] = True
    if updates:
        pipe.update_config(**updates)
    return pipe


def _emit(obj):
    click.echo(json.dumps(obj, indent=2, sort_keys=True, default=str))


def _run(fn):
    try:
        fn()
    except (ProviderUnreachable, AuthMissing) as exc:
        click.echo(f"provider error: {exc}", err=True)
        sys.exit(2)
    except LabelPipeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except (OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@click.group()
@click.option("--store", "store_dir", default="./labelpipe-store",
              show_default=True, help="Project store directory.")
@click.option("--config", "config_file", type=click.Path(exists=True),
              default=None, help="JSON config document merged into the store.")
@click.option("--seed", type=int, default=None, help="Split seed override.")
@click.option("--offline", is_flag=True,
              help="Mock/cache providers only; never touch the network.")
@click.pass_context
def main(ctx, store_dir, config_file, seed, offline):
    ctx.ensure_object(dict)
    ctx.obj.update(store=store_dir, config_file=config_file, seed=seed,
                   offline=offline)


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--schema", required=True,
              help="Comma-separated class list, e.g. past,present,future.")
@click.pass_context
def ingest(ctx, corpus_path, schema):
    """Ingest a line-delimited JSON corpus into the store."""
    def go():
        pipe = _pipeline(ctx)
        with pipe.store.lock():
            manifest = pipe.ingest(corpus_path, schema.split(","))
        _emit(manifest)
    _run(go)


@main.command()
@click.option("--task", required=True)
@click.pass_context
def split(ctx, task):
    """Materialize the four-way split manifest for one task."""
    def go():
        pipe = _pipeline(ctx)
        with pipe.store.lock():
            parts = pipe.splits(task)
        _emit({name: len(part) for name, part in parts.items()})
    _run(go)


@main.command()
@click.option("--task", required=True)
@click.option("--prompt-version", type=int, default=None)
@click.option("--instructions", default=None,
              help="Create a new prompt version with these instructions "
                   "before validating.")
@click.pass_context
def validate(ctx, task, prompt_version, instructions):
    """Annotate the prompt-validation split and score against gold."""
    def go():
        pipe = _pipeline(ctx)
        with pipe.store.lock():
            if instructions is not None:
                pipe.create_prompt(task, instructions)
            if not pipe.prompt_versions(task):
                spec, _ = pipe.task(task)
                pipe.create_prompt(
                    task, f"Label whether each text is {spec.positive_label}.")
            manifest = pipe.run_validate(task, prompt_version)
            _emit(pipe.store.get_artifact(manifest["outputs"]["report"]))
    _run(go)


@main.command()
@click.option("--task", required=True)
@click.option("--prompt-version", type=int, default=None)
@click.pass_context
def generate(ctx, task, prompt_version):
    """Generate consistency-scored surrogate labels for the training split."""
    def go():
        pipe = _pipeline(ctx)
        with pipe.store.lock():
            manifest = pipe.run_generate(task, prompt_version)
            art = pipe.store.get_artifact(manifest["outputs"]["labels"])
        _emit({"task": task, "n_labels": len(art["labels"]),
               "excluded": art["excluded"],
               "token_usage": art["token_usage"]})
    _run(go)


@main.command()
@click.option("--task", required=True)
@click.option("--arm", type=click.Choice(
    ["human250", "human1000", "gpt1000", "gpt1000_filtered"]),
    default="gpt1000", show_default=True)
@click.pass_context
def train(ctx, task, arm):
    """Train the built-in student on one training arm."""
    def go():
        pipe = _pipeline(ctx)
        with pipe.store.lock():
            manifest = pipe.run_train(task, arm)
        _emit(manifest)
    _run(go)


@main.command()
@click.option("--task", required=True)
@click.option("--arm", type=click.Choice(list(ARMS) + ["gpt1000_filtered"]),
              default="gpt1000", show_default=True)
@click.pass_context
def evaluate(ctx, task, arm):
    """Evaluate one arm on the held-out test split."""
    def go():
        pipe = _pipeline(ctx)
        with pipe.store.lock():
            manifest = pipe.run_evaluate(task, arm)
            art = pipe.store.get_artifact(manifest["outputs"]["report"])
        _emit(art["metrics"])
    _run(go)


@main.command()
@click.option("--task", required=True)
@click.pass_context
def arms(ctx, task):
    """Run and compare all four training-data arms on one task."""
    def go():
        pipe = _pipeline(ctx)
        with pipe.store.lock():
            manifest = pipe.run_arms(task)
            _emit(pipe.store.get_artifact(manifest["outputs"]["comparison"]))
    _run(go)


@main.command("ablate-consistency")
@click.option("--task", required=True)
@click.pass_context
def ablate_consistency(ctx, task):
    """Compare students trained with vs without low-consistency labels."""
    def go():
        pipe = _pipeline(ctx)
        with pipe.store.lock():
            manifest = pipe.run_consistency_ablation(task)
            _emit(pipe.store.get_artifact(manifest["outputs"]["ablation"]))
    _run(go)


@main.command()
@click.argument("run_a", type=click.Path(exists=True))
@click.argument("run_b", type=click.Path(exists=True))
@click.pass_context
def drift(ctx, run_a, run_b):
    """Paired metric deltas between two report files (b minus a)."""
    def go():
        report = Pipeline.drift_from_report_files(run_a, run_b)
        _emit(report.to_json_obj())
    _run(go)


@main.command()
@click.argument("scenario_file", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None,
              help="Also write the JSON report here.")
def cost(scenario_file, out):
    """Cost comparison report from a JSON scenario file."""
    def go():
        report = cost_mod.report_from_scenario_file(scenario_file)
        click.echo(report["text"])
        if out:
            Path(out).write_text(
                json.dumps({"rows": report["rows"]}, indent=2) + "\n",
                encoding="utf-8")
    _run(go)


@main.group()
def review():
    """Disagreement review helpers."""


@review.command("export")
@click.option("--task", required=True)
@click.option("--prompt-version", type=int, default=None)
@click.pass_context
def review_export(ctx, task, prompt_version):
    """Extract LLM/gold disagreements on the prompt-validation split."""
    def go():
        pipe = _pipeline(ctx)
        with pipe.store.lock():
            manifest = pipe.run_validate(task, prompt_version)
            art = pipe.store.get_artifact(manifest["outputs"]["report"])
            parts = pipe.splits(task)
        gold = {s.id: s.gold for s in parts["prompt_val"]}
        texts = {s.id: s.text for s in parts["prompt_val"]}
        llm = {sid: (lab if lab is not None else "__unparseable__")
               for sid, lab in art["labels"].items()}
        prompt = pipe.prompt(task, prompt_version)
        records = review_mod.extract_disagreements(
            llm, gold, texts, prompt.prompt_id, prompt.version)
        jsonl = pipe.store.reviews_dir / f"{task}_disagreements.jsonl"
        sheet = pipe.store.reviews_dir / f"{task}_disagreements.txt"
        review_mod.export_disagreements(records, jsonl, sheet)
        _emit({"task": task, "count": len(records),
               "jsonl": str(jsonl), "sheet": str(sheet)})
    _run(go)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
@click.option("--read-only", is_flag=True)
@click.option("--ui-dir", type=click.Path(exists=True), default=None)
@click.pass_context
def serve(ctx, host, port, read_only, ui_dir):
    """Serve the review API (and UI when built) over HTTP."""
    def go():
        from .service import serve as run_server
        run_server(ctx.obj["store"], host=host, port=port,
                   read_only=read_only, ui_dir=ui_dir)
    _run(go)


if __name__ == "__main__":
    main()
