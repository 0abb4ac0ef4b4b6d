"""Token and cost aggregation over transcripts.

Prices are always supplied by the operator; nothing here knows what any
provider charges.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..domain import PromptKind, TokenUsage, Transcript, sum_usage
from ..errors import ConfigError


@dataclass(frozen=True)
class ModelPrice:
    prompt_per_1k: float
    completion_per_1k: float

    def __post_init__(self) -> None:
        if self.prompt_per_1k < 0 or self.completion_per_1k < 0:
            raise ConfigError("prices must be >= 0")

    def cost(self, usage: TokenUsage) -> float | None:
        if not usage.known:
            return None
        assert usage.prompt_tokens is not None and usage.completion_tokens is not None
        return usage.prompt_tokens * self.prompt_per_1k / 1000 + usage.completion_tokens * self.completion_per_1k / 1000


@dataclass(frozen=True)
class PriceSheet:
    prices: Mapping[str, ModelPrice] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PriceSheet:
        prices = {}
        for model, entry in data.items():
            try:
                prices[model] = ModelPrice(float(entry["prompt_per_1k"]), float(entry["completion_per_1k"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad price entry for {model!r}: {exc}") from exc
        return cls(prices)

    @classmethod
    def from_file(cls, path: str | Path) -> PriceSheet:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("price sheet must be a JSON object keyed by model name")
        return cls.from_dict(data)

    def get(self, model: str) -> ModelPrice | None:
        return self.prices.get(model)

    def scaled(self, factor: float) -> PriceSheet:
        return PriceSheet(
            {m: ModelPrice(p.prompt_per_1k * factor, p.completion_per_1k * factor) for m, p in self.prices.items()}
        )


@dataclass(frozen=True)
class ReportRow:
    model: str
    mode: str
    sessions: int
    calls: dict[str, int]
    tokens: TokenUsage
    # Tokens spent in round k (k=0 is the initial answer), summed over sessions.
    round_tokens: list[int | None]
    cost: float | None
    priced: bool

    @property
    def cost_per_session(self) -> float | None:
        if self.cost is None or not self.sessions:
            return None
        return self.cost / self.sessions

    @property
    def total_calls(self) -> int:
        return sum(self.calls.values())


@dataclass(frozen=True)
class CostReport:
    rows: list[ReportRow]
    tokens: TokenUsage
    calls: int
    cost: float | None

    def row(self, model: str, mode: str) -> ReportRow:
        for r in self.rows:
            if r.model == model and r.mode == mode:
                return r
        raise KeyError((model, mode))

    def relative_costs(self) -> dict[tuple[str, str], float | None]:
        """Per-session cost of each row divided by the cheapest priced row."""
        known = [r.cost_per_session for r in self.rows if r.cost_per_session]
        floor = min(known) if known else None
        return {
            (r.model, r.mode): (r.cost_per_session / floor if floor and r.cost_per_session is not None else None)
            for r in self.rows
        }

    def to_dict(self) -> dict[str, Any]:
        rel = self.relative_costs()
        return {
            "rows": [
                {
                    "model": r.model,
                    "mode": r.mode,
                    "sessions": r.sessions,
                    "calls": r.calls,
                    "tokens": _usage_dict(r.tokens),
                    "round_tokens": r.round_tokens,
                    "round_deltas": per_iteration_deltas(r.round_tokens),
                    "cost": r.cost,
                    "cost_per_session": r.cost_per_session,
                    "relative_cost": rel[(r.model, r.mode)],
                }
                for r in self.rows
            ],
            "totals": {"tokens": _usage_dict(self.tokens), "calls": self.calls, "cost": self.cost},
        }


def _usage_dict(u: TokenUsage) -> dict[str, int | None]:
    return {"prompt": u.prompt_tokens, "completion": u.completion_tokens, "total": u.total_tokens}


def transcript_cost(t: Transcript, prices: PriceSheet | None) -> float | None:
    price = prices.get(t.model) if prices else None
    return None if price is None else price.cost(t.ledger.total())


def round_token_totals(t: Transcript) -> list[int | None]:
    """Total tokens per round, index 0 being the initial answer call."""
    rounds = max((e.round for e in t.ledger.entries), default=-1)
    return [t.ledger.usage_for_round(k).total_tokens for k in range(rounds + 1)]


def per_iteration_deltas(round_tokens: Sequence[int | None]) -> list[int | None]:
    """Change in per-round spend from one optimization round to the next (rounds >= 1)."""
    rounds = list(round_tokens[1:])
    return [None if a is None or b is None else b - a for a, b in zip(rounds, rounds[1:])]


def cost_report(transcripts: Sequence[Transcript], prices: PriceSheet | None = None) -> CostReport:
    groups: dict[tuple[str, str], list[Transcript]] = {}
    for t in transcripts:
        groups.setdefault((t.model, t.mode.value), []).append(t)

    rows = []
    for (model, mode), group in groups.items():
        calls: dict[str, int] = {k.value: 0 for k in PromptKind}
        for t in group:
            for kind, n in t.ledger.calls_by_kind().items():
                calls[kind.value] += n
        width = max(len(round_token_totals(t)) for t in group)
        round_tokens: list[int | None] = [0] * width
        for t in group:
            for k, spent in enumerate(round_token_totals(t)):
                prev = round_tokens[k]
                round_tokens[k] = None if prev is None or spent is None else prev + spent
        costs = [transcript_cost(t, prices) for t in group]
        priced = prices is not None and prices.get(model) is not None
        rows.append(
            ReportRow(
                model=model,
                mode=mode,
                sessions=len(group),
                calls=calls,
                tokens=sum_usage(t.ledger.total() for t in group),
                round_tokens=round_tokens,
                cost=sum(costs) if priced and all(c is not None for c in costs) else None,  # type: ignore[misc]
                priced=priced,
            )
        )

    row_costs = [r.cost for r in rows]
    return CostReport(
        rows=rows,
        tokens=sum_usage(r.tokens for r in rows),
        calls=sum(r.total_calls for r in rows),
        cost=sum(row_costs) if rows and all(c is not None for c in row_costs) else None,  # type: ignore[misc]
    )


def _fmt(value: float | int | None, spec: str = "") -> str:
    return "n/a" if value is None else format(value, spec)


def format_report(report: CostReport) -> str:
    if not report.rows:
        return "no transcripts"
    rel = report.relative_costs()
    header = f"{'model':<20} {'mode':<9} {'sess':>4} {'calls':>5} {'prompt':>8} {'compl':>8} {'total':>8} {'cost':>10} {'cost/sess':>10} {'rel':>6}"
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append(
            f"{r.model:<20} {r.mode:<9} {r.sessions:>4} {r.total_calls:>5} "
            f"{_fmt(r.tokens.prompt_tokens):>8} {_fmt(r.tokens.completion_tokens):>8} {_fmt(r.tokens.total_tokens):>8} "
            f"{_fmt(r.cost, '.4f'):>10} {_fmt(r.cost_per_session, '.4f'):>10} {_fmt(rel[(r.model, r.mode)], '.2f'):>6}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'total':<30} {report.calls:>10} {_fmt(report.tokens.prompt_tokens):>8} "
        f"{_fmt(report.tokens.completion_tokens):>8} {_fmt(report.tokens.total_tokens):>8} {_fmt(report.cost, '.4f'):>10}"
    )
    lines.append("")
    lines.append("calls by kind and per-round tokens:")
    for r in report.rows:
        kinds = ", ".join(f"{k}={n}" for k, n in r.calls.items() if n)
        rounds = " ".join(_fmt(x) for x in r.round_tokens)
        deltas = " ".join(_fmt(x) for x in per_iteration_deltas(r.round_tokens)) or "-"
        lines.append(f"  {r.model}/{r.mode}: {kinds}")
        lines.append(f"    round tokens [{rounds}]  deltas [{deltas}]")
    return "\n".join(lines)
