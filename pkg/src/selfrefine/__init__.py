"""Let a chat model critique, improve and judge its own answers."""

from .domain import (
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
from .engine import SessionState, Settings, accept_rule, parse_vote, run_session, step

__all__ = [
    "Answer",
    "CostLedger",
    "DefectReport",
    "IterationRecord",
    "LedgerEntry",
    "PromptKind",
    "Query",
    "RefinementMode",
    "SessionState",
    "Settings",
    "StopReason",
    "TokenUsage",
    "Transcript",
    "Vote",
    "accept_rule",
    "parse_vote",
    "run_session",
    "step",
]
