"""Batch LLM annotation with versioned prompts, caching, and retries.

The provider protocol is the common chat-completion HTTP contract: a JSON
body with model name, message list and temperature, bearer-token auth read
from an environment variable.  Any compatible endpoint, hosted or local,
plugs in.  A deterministic mock provider (seeded noisy oracle over gold
labels) keeps every test and the ``--offline`` pipeline mode networkless.

Responses must label the batch in a canonical numbered-line format::

    1: YES
    2: NO

One line per sample, 1-based, using the exact lexicon tokens.  Anything
else is a structured parse failure and the whole batch is retried.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field

import requests

from .errors import (
    AuthMissing,
    CountMismatch,
    OversizedBatch,
    ParseFailure,
    ProviderUnreachable,
    UnknownToken,
)


@dataclass(frozen=True)
class PromptVersion:
    prompt_id: str
    version: int
    instructions: str
    label_lexicon: dict     # task label -> exact output token
    created_at: str = ""

    def content_hash(self) -> str:
        payload = json.dumps(
            {"prompt_id": self.prompt_id, "version": self.version,
             "instructions": self.instructions,
             "label_lexicon": dict(sorted(self.label_lexicon.items()))},
            sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def token_to_label(self) -> dict:
        return {token: label for label, token in self.label_lexicon.items()}


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str = "http://localhost:8080"
    model_name: str = "mock"
    auth_token_env: str = "LABELPIPE_API_TOKEN"
    temperature: float = 0.0
    batch_size: int = 10
    max_retries: int = 3
    timeout: float = 60.0
    max_in_flight: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0 <= self.temperature <= 2):
            raise ValueError("temperature must be in [0, 2]")


@dataclass(frozen=True)
class RawAnnotation:
    sample_id: str
    iteration: int
    label: str | None            # None when unparseable
    raw_response: str
    prompt_id: str
    prompt_version: int
    input_tokens: int = 0
    output_tokens: int = 0

    @property
    def parseable(self) -> bool:
        return self.label is not None


class TokenLedger:
    """Accumulated token usage across provider calls."""

    def __init__(self):
        self.input_tokens = 0
        self.output_tokens = 0
        self.requests = 0
        self.retries = 0
        self._lock = threading.Lock()

    def add(self, input_tokens: int, output_tokens: int):
        with self._lock:
            self.input_tokens += input_tokens
            self.output_tokens += output_tokens
            self.requests += 1

    def add_retry(self):
        with self._lock:
            self.retries += 1

    def to_json_obj(self) -> dict:
        return {"input_tokens": self.input_tokens,
                "output_tokens": self.output_tokens,
                "requests": self.requests, "retries": self.retries}


def render_prompt(prompt: PromptVersion, batch, batch_size: int = 10) -> dict:
    """Chat-completion payload for one batch: instructions + numbered items."""
    if not 1 <= len(batch) <= batch_size:
        raise OversizedBatch(f"batch size {len(batch)} not in [1, {batch_size}]")
    lines = [f"{i}. {s.text}" for i, s in enumerate(batch, start=1)]
    tokens = " / ".join(sorted(prompt.label_lexicon.values()))
    user = (
        f"Label each numbered text with exactly one of: {tokens}.\n"
        f"Answer with one line per item, formatted as 'N: TOKEN'.\n\n"
        + "\n".join(lines)
    )
    return {
        "messages": [
            {"role": "system", "content": prompt.instructions},
            {"role": "user", "content": user},
        ],
    }


_LINE_RE = re.compile(r"^\s*(\d+)\s*[:.)]\s*(.+?)\s*$")


def parse_response(raw: str, expected_n: int, lexicon: dict) -> list[str]:
    """Map a numbered-line response to labels, or raise a structured failure.

    Returns labels in item order (index 0 = item 1).  Raises CountMismatch
    or UnknownToken; never partially accepts a batch.
    """
    token_to_label = {token: label for label, token in lexicon.items()}
    found: dict[int, str] = {}
    for line in raw.splitlines():
        if not line.strip():
            continue
        m = _LINE_RE.match(line)
        if not m:
            continue
        idx = int(m.group(1))
        if 1 <= idx <= expected_n and idx not in found:
            found[idx] = m.group(2)
    if len(found) != expected_n:
        raise CountMismatch(len(found), expected_n)
    labels = []
    for idx in range(1, expected_n + 1):
        token = found[idx]
        if token not in token_to_label:
            raise UnknownToken(idx, token)
        labels.append(token_to_label[token])
    return labels


class HttpProvider:
    """Chat-completion client with bearer auth and exponential-backoff retry."""

    def __init__(self, config: ProviderConfig, session=None):
        self.config = config
        self.session = session or requests.Session()

    def _auth_header(self) -> dict:
        token = os.environ.get(self.config.auth_token_env)
        if not token:
            raise AuthMissing(self.config.auth_token_env)
        return {"Authorization": f"Bearer {token}"}

    def complete(self, payload: dict, temperature: float) -> tuple[str, int, int]:
        """Returns (response text, input tokens, output tokens)."""
        body = {
            "model": self.config.model_name,
            "messages": payload["messages"],
            "temperature": temperature,
        }
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        last_error = None
        for attempt in range(self.config.max_retries + 1):
            try:
                resp = self.session.post(
                    url, json=body, headers=self._auth_header(),
                    timeout=self.config.timeout)
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = f"HTTP {resp.status_code}"
                    raise requests.RequestException(last_error)
                resp.raise_for_status()
                data = resp.json()
                text = data["choices"][0]["message"]["content"]
                usage = data.get("usage", {})
                return (text, int(usage.get("prompt_tokens", 0)),
                        int(usage.get("completion_tokens", 0)))
            except requests.RequestException as exc:
                last_error = str(exc)
                if attempt < self.config.max_retries:
                    time.sleep(min(2.0 ** attempt * 0.5, 30.0))
        raise ProviderUnreachable(
            f"{url} unreachable after {self.config.max_retries} retries: "
            f"{last_error}")


class MockProvider:
    """Deterministic offline provider: gold labels with seeded symmetric noise.

    The flip decision for a (sample, iteration) pair depends only on the
    seed and the pair itself, never on batching, so reruns and cache replays
    agree exactly.  ``fail_first`` makes the first N calls raise, for retry
    tests.
    """

    def __init__(self, gold: dict, lexicon: dict, noise: float = 0.0,
                 seed: int = 0, fail_first: int = 0):
        self.gold = dict(gold)
        self.lexicon = dict(lexicon)
        self.noise = noise
        self.seed = seed
        self.fail_first = fail_first
        self.calls = 0
        self.failures_injected = 0

    def _flip(self, sample_id: str, iteration: int) -> bool:
        if self.noise <= 0:
            return False
        key = f"{self.seed}|{sample_id}|{iteration}".encode("utf-8")
        digest = hashlib.sha256(key).digest()
        draw = int.from_bytes(digest[:8], "big") / 2 ** 64
        return draw < self.noise

    def label_for(self, sample_id: str, iteration: int) -> str:
        gold = self.gold[sample_id]
        if self._flip(sample_id, iteration):
            others = [lab for lab in self.lexicon if lab != gold]
            return sorted(others)[0] if others else gold
        return gold

    def complete_batch(self, batch_ids, iteration: int) -> tuple[str, int, int]:
        self.calls += 1
        if self.failures_injected < self.fail_first:
            self.failures_injected += 1
            raise ProviderUnreachable("mock provider scripted failure")
        lines = []
        for i, sid in enumerate(batch_ids, start=1):
            token = self.lexicon[self.label_for(sid, iteration)]
            lines.append(f"{i}: {token}")
        text = "\n".join(lines)
        # Nominal usage so token accounting paths are exercised offline.
        return text, 100 * len(batch_ids), 5 * len(batch_ids)


class AnnotationCache:
    """Append-only line-delimited JSON cache keyed by request content hash."""

    def __init__(self, path):
        self.path = path
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if path is not None and os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        obj = json.loads(line)
                        self._entries[obj["key"]] = obj

    @staticmethod
    def key(model_name: str, prompt_hash: str, sample_id: str,
            iteration: int) -> str:
        raw = f"{model_name}|{prompt_hash}|{sample_id}|{iteration}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def get(self, key: str) -> dict | None:
        return self._entries.get(key)

    def put(self, key: str, record: dict):
        with self._lock:
            if key in self._entries:
                return
            obj = {"key": key, **record}
            self._entries[key] = obj
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(obj, ensure_ascii=False,
                                        separators=(",", ":")) + "\n")


@dataclass
class AnnotationResult:
    annotations: list          # RawAnnotation, input order x iteration
    ledger: TokenLedger
    network_requests: int = 0
    cache_hits: int = 0


def annotate(samples, task, prompt: PromptVersion, provider,
             config: ProviderConfig, iterations: int = 1,
             cache: AnnotationCache | None = None) -> AnnotationResult:
    """Annotate every sample ``iterations`` times, via cache where possible.

    ``provider`` is an HttpProvider or MockProvider.  Returns exactly
    len(samples) * iterations records in (iteration, input order); batches
    whose responses stay malformed after max_retries yield unparseable
    records rather than failing the run.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    cache = cache or AnnotationCache(None)
    ledger = TokenLedger()
    prompt_hash = prompt.content_hash()
    by_id = {s.id: s for s in samples}
    results: dict[tuple[str, int], RawAnnotation] = {}
    cache_hits = 0
    network_requests = 0

    for iteration in range(iterations):
        pending = []
        for s in samples:
            key = AnnotationCache.key(config.model_name, prompt_hash,
                                      s.id, iteration)
            hit = cache.get(key)
            if hit is not None:
                cache_hits += 1
                results[(s.id, iteration)] = RawAnnotation(
                    sample_id=s.id, iteration=iteration,
                    label=hit.get("label"), raw_response=hit.get("raw", ""),
                    prompt_id=prompt.prompt_id, prompt_version=prompt.version,
                    input_tokens=0, output_tokens=0)
            else:
                pending.append(s.id)

        for start in range(0, len(pending), config.batch_size):
            batch_ids = pending[start:start + config.batch_size]
            batch = [by_id[sid] for sid in batch_ids]
            labels, raw, usage_in, usage_out, retries = _query_batch(
                batch, batch_ids, iteration, prompt, provider, config)
            ledger.retries += retries
            if raw is not None:
                network_requests += 1
                ledger.add(usage_in, usage_out)
            for pos, sid in enumerate(batch_ids):
                label = labels[pos] if labels is not None else None
                ann = RawAnnotation(
                    sample_id=sid, iteration=iteration, label=label,
                    raw_response=raw or "", prompt_id=prompt.prompt_id,
                    prompt_version=prompt.version,
                    input_tokens=usage_in if pos == 0 else 0,
                    output_tokens=usage_out if pos == 0 else 0)
                results[(sid, iteration)] = ann
                cache.put(
                    AnnotationCache.key(config.model_name, prompt_hash,
                                        sid, iteration),
                    {"sample_id": sid, "iteration": iteration, "label": label,
                     "raw": raw or "", "model": config.model_name,
                     "prompt_hash": prompt_hash})

    ordered = [results[(s.id, it)]
               for it in range(iterations) for s in samples]
    return AnnotationResult(annotations=ordered, ledger=ledger,
                            network_requests=network_requests,
                            cache_hits=cache_hits)


def _query_batch(batch, batch_ids, iteration, prompt, provider, config):
    """One batch with whole-batch retry on parse failure.

    Returns (labels or None, raw text or None, in_tokens, out_tokens,
    parse_retries).
    """
    payload = render_prompt(prompt, batch, config.batch_size)
    retries = 0
    raw = None
    usage_in = usage_out = 0
    attempts = 0
    while attempts <= config.max_retries:
        attempts += 1
        try:
            if isinstance(provider, MockProvider):
                raw, usage_in, usage_out = provider.complete_batch(
                    batch_ids, iteration)
            else:
                raw, usage_in, usage_out = provider.complete(
                    payload, config.temperature)
        except ProviderUnreachable:
            if attempts > config.max_retries:
                raise
            retries += 1
            continue
        try:
            labels = parse_response(raw, len(batch), prompt.label_lexicon)
            return labels, raw, usage_in, usage_out, retries
        except ParseFailure:
            retries += 1
    return None, raw, usage_in, usage_out, retries


def group_by_sample(annotations) -> dict:
    """sample_id -> list of labels ordered by iteration (None if unparseable)."""
    grouped: dict[str, list] = {}
    for ann in sorted(annotations, key=lambda a: a.iteration):
        grouped.setdefault(ann.sample_id, []).append(ann.label)
    return grouped


# --- prompt files ----------------------------------------------------------

def save_prompt(prompt: PromptVersion, directory) -> None:
    """Prompt text plus JSON lexicon sidecar, named by id and version."""
    from pathlib import Path
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = f"{prompt.prompt_id}_v{prompt.version}"
    (directory / f"{stem}.txt").write_text(prompt.instructions,
                                           encoding="utf-8")
    sidecar = {"prompt_id": prompt.prompt_id, "version": prompt.version,
               "label_lexicon": prompt.label_lexicon,
               "created_at": prompt.created_at}
    (directory / f"{stem}.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_prompt(directory, prompt_id: str, version: int) -> PromptVersion:
    from pathlib import Path
    directory = Path(directory)
    stem = f"{prompt_id}_v{version}"
    instructions = (directory / f"{stem}.txt").read_text(encoding="utf-8")
    sidecar = json.loads((directory / f"{stem}.json").read_text(
        encoding="utf-8"))
    return PromptVersion(prompt_id=prompt_id, version=version,
                         instructions=instructions,
                         label_lexicon=sidecar["label_lexicon"],
                         created_at=sidecar.get("created_at", ""))


def list_prompt_versions(directory, prompt_id: str) -> list[int]:
    from pathlib import Path
    directory = Path(directory)
    if not directory.exists():
        return []
    versions = []
    pattern = re.compile(re.escape(prompt_id) + r"_v(\d+)\.json$")
    for path in directory.iterdir():
        m = pattern.match(path.name)
        if m:
            versions.append(int(m.group(1)))
    return sorted(versions)
