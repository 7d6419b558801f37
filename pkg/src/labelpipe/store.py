"""Content-addressed project store with a single JSON run index.

Layout under the store root:

    index.json           run manifests and project config (timestamps live
                         here, never in artifacts)
    artifacts/<sha>.json content-addressed artifact files, canonical JSON
    corpora/<sha>.jsonl  ingested corpus files, addressed by content
    cache.jsonl          annotation response cache
    prompts/             versioned prompt files + lexicon sidecars
    reviews/             audit log and disagreement exports
    .lock                single-writer lock file

Artifacts are byte-canonical (sorted keys, fixed separators), so identical
pipeline inputs always produce identical artifact bytes and hashes.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import time
from contextlib import contextmanager
from pathlib import Path


def canonical_json_bytes(obj) -> bytes:
    return (json.dumps(obj, ensure_ascii=False, sort_keys=True,
                       separators=(",", ":")) + "\n").encode("utf-8")


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class StoreLocked(Exception):
    pass


class Store:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "artifacts").mkdir(exist_ok=True)
        (self.root / "corpora").mkdir(exist_ok=True)
        (self.root / "reviews").mkdir(exist_ok=True)
        self.index_path = self.root / "index.json"
        if not self.index_path.exists():
            self._write_index({"runs": {}, "config": {}})

    # --- index ------------------------------------------------------------

    def _read_index(self) -> dict:
        with open(self.index_path, encoding="utf-8") as fh:
            return json.load(fh)

    def _write_index(self, index: dict) -> None:
        tmp = self.index_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(index, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.index_path)

    @property
    def config(self) -> dict:
        return self._read_index().get("config", {})

    def set_config(self, config: dict) -> None:
        index = self._read_index()
        index["config"] = config
        self._write_index(index)

    # --- locking ----------------------------------------------------------

    @contextmanager
    def lock(self, timeout: float = 10.0):
        lock_path = self.root / ".lock"
        deadline = time.monotonic() + timeout
        while True:
            try:
                fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                os.write(fd, str(os.getpid()).encode())
                os.close(fd)
                break
            except FileExistsError:
                if time.monotonic() >= deadline:
                    raise StoreLocked(f"store locked: {lock_path}")
                time.sleep(0.05)
        try:
            yield self
        finally:
            os.unlink(lock_path)

    # --- artifacts ---------------------------------------------------------

    def put_artifact(self, obj) -> str:
        data = canonical_json_bytes(obj)
        digest = content_hash(data)
        path = self.root / "artifacts" / f"{digest}.json"
        if not path.exists():
            path.write_bytes(data)
        return digest

    def get_artifact(self, digest: str):
        path = self.root / "artifacts" / f"{digest}.json"
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def artifact_hashes(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "artifacts").glob("*.json"))

    # --- corpora ----------------------------------------------------------

    def put_corpus_file(self, path) -> str:
        data = Path(path).read_bytes()
        digest = content_hash(data)
        dest = self.root / "corpora" / f"{digest}.jsonl"
        if not dest.exists():
            shutil.copyfile(path, dest)
        return digest

    def corpus_path(self, digest: str) -> Path:
        return self.root / "corpora" / f"{digest}.jsonl"

    # --- runs -------------------------------------------------------------

    @staticmethod
    def run_id(step: str, task_id: str, input_hashes: dict) -> str:
        return content_hash(canonical_json_bytes(
            {"step": step, "task_id": task_id, "inputs": input_hashes}))[:16]

    def get_run(self, run_id: str) -> dict | None:
        return self._read_index()["runs"].get(run_id)

    def record_run(self, step: str, task_id: str, input_hashes: dict,
                   outputs: dict, status: str = "done") -> dict:
        """Persist a run manifest; identical inputs reuse the existing run."""
        rid = self.run_id(step, task_id, input_hashes)
        index = self._read_index()
        if rid in index["runs"] and index["runs"][rid]["status"] == "done":
            return index["runs"][rid]
        manifest = {
            "run_id": rid, "step": step, "task_id": task_id,
            "inputs": dict(input_hashes), "outputs": dict(outputs),
            "status": status, "created_at": time.time(),
        }
        index["runs"][rid] = manifest
        self._write_index(index)
        return manifest

    def find_runs(self, step: str | None = None,
                  task_id: str | None = None) -> list[dict]:
        runs = self._read_index()["runs"].values()
        out = [m for m in runs
               if (step is None or m["step"] == step)
               and (task_id is None or m["task_id"] == task_id)]
        return sorted(out, key=lambda m: m["created_at"])

    def latest_run(self, step: str, task_id: str | None = None,
                   **input_filters) -> dict | None:
        matches = []
        for m in self.find_runs(step, task_id):
            if all(m["inputs"].get(k) == v for k, v in input_filters.items()):
                matches.append(m)
        return matches[-1] if matches else None

    # --- paths ------------------------------------------------------------

    @property
    def cache_path(self) -> Path:
        return self.root / "cache.jsonl"

    @property
    def prompts_dir(self) -> Path:
        return self.root / "prompts"

    @property
    def reviews_dir(self) -> Path:
        return self.root / "reviews"
