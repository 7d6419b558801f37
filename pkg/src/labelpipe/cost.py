"""Annotation cost models: LLM token pricing vs. human labor.

All currency arithmetic uses Decimal so totals are exact; display rounds
to cents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

CENTS = Decimal("0.01")


def _dec(x) -> Decimal:
    if isinstance(x, Decimal):
        return x
    if isinstance(x, float):
        # The decimal the caller wrote, not its binary representation.
        return Decimal(str(x))
    return Decimal(x)


@dataclass(frozen=True)
class LlmCostInput:
    n_batches: int
    input_tokens_per_batch: int
    output_tokens_per_batch: int
    rate_in: Decimal   # currency per input token
    rate_out: Decimal  # currency per output token

    def __post_init__(self):
        object.__setattr__(self, "rate_in", _dec(self.rate_in))
        object.__setattr__(self, "rate_out", _dec(self.rate_out))
        if min(self.n_batches, self.input_tokens_per_batch,
               self.output_tokens_per_batch) < 0:
            raise ValueError("counts must be non-negative")
        if self.rate_in < 0 or self.rate_out < 0:
            raise ValueError("rates must be non-negative")


@dataclass(frozen=True)
class HumanCostInput:
    n_samples: int
    seconds_per_task: Decimal
    hourly_rate: Decimal
    workers_per_task: int = 1

    def __post_init__(self):
        object.__setattr__(self, "seconds_per_task", _dec(self.seconds_per_task))
        object.__setattr__(self, "hourly_rate", _dec(self.hourly_rate))
        if self.workers_per_task < 1:
            raise ValueError("workers_per_task must be >= 1")
        if self.seconds_per_task <= 0:
            raise ValueError("seconds_per_task must be > 0")
        if self.n_samples < 0:
            raise ValueError("n_samples must be >= 0")


@dataclass(frozen=True)
class CostEstimate:
    total: Decimal
    breakdown: dict = field(default_factory=dict)
    assumptions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.total != sum(self.breakdown.values(), Decimal(0)):
            raise ValueError("total must equal the sum of breakdown components")

    def to_json_obj(self) -> dict:
        return {
            "total": str(self.total.quantize(CENTS, rounding=ROUND_HALF_UP)),
            "breakdown": {k: str(v) for k, v in self.breakdown.items()},
            "assumptions": {k: str(v) for k, v in self.assumptions.items()},
        }


def estimate_llm_cost(inp: LlmCostInput) -> CostEstimate:
    """Token cost: batches * (input tokens * rate_in + output tokens * rate_out)."""
    input_cost = inp.n_batches * inp.input_tokens_per_batch * inp.rate_in
    output_cost = inp.n_batches * inp.output_tokens_per_batch * inp.rate_out
    return CostEstimate(
        total=input_cost + output_cost,
        breakdown={"input_tokens": input_cost, "output_tokens": output_cost},
        assumptions={
            "n_batches": inp.n_batches,
            "input_tokens_per_batch": inp.input_tokens_per_batch,
            "output_tokens_per_batch": inp.output_tokens_per_batch,
            "rate_in": inp.rate_in,
            "rate_out": inp.rate_out,
        },
    )


def estimate_human_cost(inp: HumanCostInput) -> CostEstimate:
    """Labor cost: tasks * seconds each, priced at an hourly rate."""
    tasks = Decimal(inp.n_samples * inp.workers_per_task)
    hours = tasks * inp.seconds_per_task / Decimal(3600)
    labor = hours * inp.hourly_rate
    return CostEstimate(
        total=labor,
        breakdown={"labor": labor},
        assumptions={
            "n_samples": inp.n_samples,
            "workers_per_task": inp.workers_per_task,
            "tasks": tasks,
            "seconds_per_task": inp.seconds_per_task,
            "hours": hours,
            "hourly_rate": inp.hourly_rate,
        },
    )


def cost_comparison_report(scenarios: list[tuple[str, CostEstimate]]) -> dict:
    """Render named scenarios as machine-readable JSON plus aligned text."""
    if not scenarios:
        raise ValueError("need at least one scenario")
    for name, _ in scenarios:
        if not name:
            raise ValueError("scenario names must be non-empty")
    rows = []
    for name, est in scenarios:
        rows.append({
            "name": name,
            "total": str(est.total.quantize(CENTS, rounding=ROUND_HALF_UP)),
            "breakdown": {k: str(v.quantize(CENTS, rounding=ROUND_HALF_UP))
                          for k, v in est.breakdown.items()},
        })
    width = max(len(r["name"]) for r in rows)
    lines = [f"{r['name']:<{width}}  ${r['total']}" for r in rows]
    return {"rows": rows, "text": "\n".join(lines)}


def scenario_from_json(obj: dict) -> tuple[str, CostEstimate]:
    """One scenario from a JSON config entry: {"name", "kind", params...}."""
    name = obj.get("name", "")
    kind = obj.get("kind")
    if kind == "llm":
        est = estimate_llm_cost(LlmCostInput(
            n_batches=int(obj["n_batches"]),
            input_tokens_per_batch=int(obj["input_tokens_per_batch"]),
            output_tokens_per_batch=int(obj["output_tokens_per_batch"]),
            rate_in=_dec(obj["rate_in"]),
            rate_out=_dec(obj["rate_out"]),
        ))
    elif kind == "human":
        est = estimate_human_cost(HumanCostInput(
            n_samples=int(obj["n_samples"]),
            seconds_per_task=_dec(obj["seconds_per_task"]),
            hourly_rate=_dec(obj["hourly_rate"]),
            workers_per_task=int(obj.get("workers_per_task", 1)),
        ))
    else:
        raise ValueError(f"unknown scenario kind: {kind!r}")
    return name, est


def report_from_scenario_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    scenarios = [scenario_from_json(obj) for obj in data["scenarios"]]
    return cost_comparison_report(scenarios)
