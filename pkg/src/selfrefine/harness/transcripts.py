"""JSON Lines persistence for transcripts, one session per line."""

from __future__ import annotations

import json
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from ..domain import (
    Answer,
    CostLedger,
    DefectReport,
    IterationRecord,
    LedgerEntry,
    PromptKind,
    Query,
    RefinementMode,
    StopReason,
    TokenUsage,
    Transcript,
    Vote,
)
from ..errors import RefineError, SchemaError


def _usage_to_dict(usage: TokenUsage) -> dict[str, int | None]:
    return {"prompt": usage.prompt_tokens, "completion": usage.completion_tokens, "total": usage.total_tokens}


def _answer_to_dict(answer: Answer) -> dict[str, Any]:
    return {"text": answer.text, "round": answer.round}


def transcript_to_dict(t: Transcript) -> dict[str, Any]:
    records = []
    for r in t.records:
        rec: dict[str, Any] = {"round": r.round}
        if r.defect is not None:
            rec["defect"] = r.defect.text
        rec["candidate"] = _answer_to_dict(r.candidate)
        if r.vote is not None:
            rec["vote"] = r.vote.value
        rec["accepted"] = r.accepted
        rec["tokens"] = _usage_to_dict(r.tokens)
        records.append(rec)
    out: dict[str, Any] = {
        "query": {"id": t.query.id, "text": t.query.text, "max_iterations": t.query.max_iterations},
        "mode": t.mode.value,
        "model": t.model,
        "initial": _answer_to_dict(t.initial),
        "records": records,
        "final": _answer_to_dict(t.final),
        "stop_reason": t.stop_reason.value,
        "ledger": {
            "entries": [
                {"kind": e.kind.value, "round": e.round, **_usage_to_dict(e.usage)} for e in t.ledger.entries
            ]
        },
    }
    if t.error is not None:
        out["error"] = t.error
    return out


def _get(obj: Any, key: str, types: type | tuple[type, ...], where: str, optional: bool = False) -> Any:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where} must be an object")
    if key not in obj:
        if optional:
            return None
        raise SchemaError(f"{where} is missing {key!r}")
    value = obj[key]
    if optional and value is None:
        return None
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise SchemaError(f"{where}.{key} has the wrong type")
    if not isinstance(value, types):
        raise SchemaError(f"{where}.{key} has the wrong type")
    return value


def _usage_from(obj: Any, where: str) -> TokenUsage:
    return TokenUsage(
        _get(obj, "prompt", int, where, optional=True),
        _get(obj, "completion", int, where, optional=True),
        _get(obj, "total", int, where, optional=True),
    )


def _answer_from(obj: Any, where: str) -> Answer:
    return Answer(_get(obj, "text", str, where), _get(obj, "round", int, where))


def _enum(cls: type, value: Any, where: str) -> Any:
    try:
        return cls(value)
    except ValueError:
        raise SchemaError(f"{where}: unknown value {value!r}") from None


def transcript_from_dict(data: Any) -> Transcript:
    """Rebuild a transcript, raising :class:`SchemaError` on any violation."""
    try:
        q = _get(data, "query", dict, "transcript")
        query = Query(_get(q, "id", str, "query"), _get(q, "text", str, "query"), _get(q, "max_iterations", int, "query"))
        records = []
        for i, rec in enumerate(_get(data, "records", list, "transcript")):
            where = f"records[{i}]"
            rnd = _get(rec, "round", int, where)
            defect_text = _get(rec, "defect", str, where, optional=True)
            vote = _get(rec, "vote", str, where, optional=True)
            records.append(
                IterationRecord(
                    round=rnd,
                    candidate=_answer_from(_get(rec, "candidate", dict, where), f"{where}.candidate"),
                    accepted=_get(rec, "accepted", bool, where),
                    tokens=_usage_from(_get(rec, "tokens", dict, where), f"{where}.tokens"),
                    defect=None if defect_text is None else DefectReport(defect_text, rnd),
                    vote=None if vote is None else _enum(Vote, vote, f"{where}.vote"),
                )
            )
        entries = []
        for i, e in enumerate(_get(_get(data, "ledger", dict, "transcript"), "entries", list, "ledger")):
            where = f"ledger.entries[{i}]"
            entries.append(
                LedgerEntry(
                    _enum(PromptKind, _get(e, "kind", str, where), f"{where}.kind"),
                    _get(e, "round", int, where),
                    _usage_from(e, where),
                )
            )
        return Transcript(
            query=query,
            mode=_enum(RefinementMode, _get(data, "mode", str, "transcript"), "mode"),
            initial=_answer_from(_get(data, "initial", dict, "transcript"), "initial"),
            records=tuple(records),
            final=_answer_from(_get(data, "final", dict, "transcript"), "final"),
            stop_reason=_enum(StopReason, _get(data, "stop_reason", str, "transcript"), "stop_reason"),
            ledger=CostLedger(tuple(entries)),
            model=_get(data, "model", str, "transcript", optional=True) or "",
            error=_get(data, "error", str, "transcript", optional=True),
        )
    except SchemaError:
        raise
    except (RefineError, ValueError) as exc:
        raise SchemaError(str(exc)) from exc


def dumps(t: Transcript) -> str:
    return json.dumps(transcript_to_dict(t), ensure_ascii=False)


def write_transcripts(transcripts: Iterable[Transcript], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in transcripts:
            fh.write(dumps(t) + "\n")


def read_transcripts(path: str | Path) -> list[Transcript]:
    """Load a transcript file; blank lines are skipped, bad lines name their number."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from exc
            try:
                out.append(transcript_from_dict(data))
            except SchemaError as exc:
                raise SchemaError(str(exc), lineno) from exc
    return out
