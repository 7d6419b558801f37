"""HTTP JSON API over the pipeline store, for the review UI.

Read-mostly: every GET serializes stored artifacts (plus filters), nothing
is recomputed, so identical requests return identical bytes.  The single
write endpoint appends disagreement review statuses to the audit log and
is disabled in read-only mode.  Endpoints live under ``/api/v1/``; the
companion single-page UI, when built, is served from ``/ui/``.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .review import RESOLUTION_STATUSES, ReviewLog
from .store import Store


class StatusUpdate(BaseModel):
    status: str
    note: str = ""
    actor: str = ""


def create_app(store_path, read_only: bool = False,
               ui_dir=None) -> FastAPI:
    store = Store(store_path)
    app = FastAPI(title="labelpipe", version="1")

    def artifact_or_404(digest: str):
        try:
            return store.get_artifact(digest)
        except FileNotFoundError:
            raise HTTPException(404, f"artifact {digest} not found")

    @app.get("/api/v1/tasks")
    def list_tasks():
        tasks = sorted({m["task_id"] for m in store.find_runs()
                        if m["task_id"]})
        return {"tasks": tasks}

    @app.get("/api/v1/runs")
    def list_runs(step: str | None = None, task: str | None = None):
        return {"runs": store.find_runs(step, task)}

    @app.get("/api/v1/runs/{run_id}")
    def get_run(run_id: str):
        run = store.get_run(run_id)
        if run is None:
            raise HTTPException(404, f"run {run_id} not found")
        return run

    @app.get("/api/v1/artifacts/{digest}")
    def get_artifact(digest: str):
        return artifact_or_404(digest)

    @app.get("/api/v1/tasks/{task}/metrics")
    def task_metrics(task: str):
        out = []
        for run in store.find_runs("evaluate", task):
            art = artifact_or_404(run["outputs"]["report"])
            out.append({"run_id": run["run_id"], "arm": art["arm"],
                        "model": art["model"], "metrics": art["metrics"]})
        if not out:
            raise HTTPException(404, f"no evaluations for task {task}")
        return {"task": task, "reports": out}

    @app.get("/api/v1/tasks/{task}/arms")
    def task_arms(task: str):
        run = store.latest_run("arms", task)
        if run is None:
            raise HTTPException(404, f"no arm comparison for task {task}")
        return artifact_or_404(run["outputs"]["comparison"])

    @app.get("/api/v1/tasks/{task}/prompts")
    def task_prompts(task: str):
        from .annotator import list_prompt_versions, load_prompt
        versions = list_prompt_versions(store.prompts_dir, task)
        if not versions:
            raise HTTPException(404, f"no prompts for task {task}")
        out = []
        for v in versions:
            p = load_prompt(store.prompts_dir, task, v)
            out.append({"prompt_id": p.prompt_id, "version": p.version,
                        "instructions": p.instructions,
                        "label_lexicon": p.label_lexicon})
        return {"task": task, "versions": out}

    @app.get("/api/v1/tasks/{task}/prompt-delta")
    def task_prompt_delta(task: str, version_a: int = Query(...),
                          version_b: int = Query(...)):
        path = store.reviews_dir / f"{task}_delta_v{version_a}_v{version_b}.json"
        if not path.exists():
            raise HTTPException(
                404, f"no delta report for {task} v{version_a}->v{version_b}")
        return json.loads(path.read_text(encoding="utf-8"))

    def _load_disagreements(task: str) -> list[dict]:
        path = store.reviews_dir / f"{task}_disagreements.jsonl"
        if not path.exists():
            raise HTTPException(404, f"no disagreements exported for {task}")
        records = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
        # Overlay current review state from the audit log.
        log = ReviewLog(store.reviews_dir / "audit.jsonl")
        state = log.current_status(task)
        for rec in records:
            if rec["sample_id"] in state:
                rec["status"] = state[rec["sample_id"]]["status"]
                rec["note"] = state[rec["sample_id"]]["note"]
        return records

    @app.get("/api/v1/tasks/{task}/disagreements")
    def task_disagreements(task: str, status: str | None = None,
                           prompt_version: int | None = None):
        records = _load_disagreements(task)
        if status is not None:
            records = [r for r in records if r["status"] == status]
        if prompt_version is not None:
            records = [r for r in records
                       if r["prompt_version"] == prompt_version]
        return {"task": task, "disagreements": records,
                "count": len(records)}

    @app.post("/api/v1/tasks/{task}/disagreements/{sample_id}/status")
    def set_status(task: str, sample_id: str, update: StatusUpdate):
        if read_only:
            raise HTTPException(403, "server is read-only")
        if update.status not in RESOLUTION_STATUSES:
            raise HTTPException(
                422, f"status must be one of {RESOLUTION_STATUSES}")
        records = _load_disagreements(task)
        if not any(r["sample_id"] == sample_id for r in records):
            raise HTTPException(404, f"no disagreement for sample {sample_id}")
        with store.lock():
            log = ReviewLog(store.reviews_dir / "audit.jsonl")
            event = log.append(task, sample_id, update.status,
                               update.note, update.actor)
        return JSONResponse(event, status_code=200)

    @app.get("/api/v1/audit")
    def audit_log(task: str | None = None):
        log = ReviewLog(store.reviews_dir / "audit.jsonl")
        events = log.events()
        if task is not None:
            events = [e for e in events if e["task_id"] == task]
        return {"events": events}

    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = candidate if candidate.exists() else None
    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app


def serve(store_path, host: str = "127.0.0.1", port: int = 8321,
          read_only: bool = False, ui_dir=None):
    import uvicorn
    app = create_app(store_path, read_only=read_only, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)
