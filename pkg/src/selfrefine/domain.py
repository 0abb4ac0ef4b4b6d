"""Value types shared by the prompt renderer, backends, engine and harness.

Everything here is a frozen dataclass or an enum, so a transcript can be
handed between threads without copying.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidQuery, InvalidTranscript, MissingDefect


class PromptKind(str, Enum):
    """Tag carried by every outbound model call."""

    INITIAL_ANSWER = "initial"
    DEFECT_ANALYSIS = "defect"
    GUIDED_OPTIMIZATION = "optimize"
    BLIND_OPTIMIZATION = "blind_optimize"
    VOTE = "vote"


class RefinementMode(str, Enum):
    FULL = "full"
    BLIND = "blind"  # no defect analysis
    RECKLESS = "reckless"  # no vote

    @property
    def analyzes_defects(self) -> bool:
        return self is not RefinementMode.BLIND

    @property
    def votes(self) -> bool:
        return self is not RefinementMode.RECKLESS


class Vote(str, Enum):
    """Verdict of the comparison call.

    The values are the labels the model is asked to reply with: "1" names
    the previous answer, "2" the freshly optimized one.
    """

    TIE = "0"
    PREVIOUS = "1"
    CANDIDATE = "2"


class StopReason(str, Enum):
    MAX_ITERATIONS = "max_iterations"
    VOTE_REJECTED = "vote_rejected"
    VOTE_TIE = "vote_tie"
    BACKEND_ERROR = "backend_error"


@dataclass(frozen=True)
class Query:
    id: str
    text: str
    max_iterations: int = 3

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise InvalidQuery("query text must be non-empty")
        # Surrounding whitespace would leak into every rendered prompt.
        if self.text != self.text.strip():
            raise InvalidQuery("query text must not carry leading or trailing whitespace")
        if isinstance(self.max_iterations, bool) or not isinstance(self.max_iterations, int):
            raise InvalidQuery("max_iterations must be an integer")
        if self.max_iterations < 0:
            raise InvalidQuery(f"max_iterations must be >= 0, got {self.max_iterations}")


@dataclass(frozen=True)
class Answer:
    text: str
    round: int = 0

    def __post_init__(self) -> None:
        if self.round < 0:
            raise ValueError(f"answer round must be >= 0, got {self.round}")


@dataclass(frozen=True)
class DefectReport:
    text: str
    round: int

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise MissingDefect(f"empty defect analysis in round {self.round}")
        if self.round < 1:
            raise ValueError(f"defect round must be >= 1, got {self.round}")


def _add_optional(x: int | None, y: int | None) -> int | None:
    if x is None or y is None:
        return None
    return x + y


@dataclass(frozen=True)
class TokenUsage:
    """Token counts for one or more calls.

    ``None`` means the backend did not report that component. Sums
    propagate ``None`` so an aggregate is never silently understated.
    """

    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    total_tokens: int | None = None

    def __post_init__(self) -> None:
        for name in ("prompt_tokens", "completion_tokens", "total_tokens"):
            value = getattr(self, name)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < 0):
                raise ValueError(f"{name} must be a non-negative integer or None, got {value!r}")
        p, c = self.prompt_tokens, self.completion_tokens
        if p is not None and c is not None:
            if self.total_tokens is None:
                object.__setattr__(self, "total_tokens", p + c)
            elif self.total_tokens != p + c:
                raise ValueError(f"total_tokens {self.total_tokens} != {p} + {c}")

    @classmethod
    def of(cls, prompt_tokens: int, completion_tokens: int) -> TokenUsage:
        return cls(prompt_tokens, completion_tokens, prompt_tokens + completion_tokens)

    @classmethod
    def zero(cls) -> TokenUsage:
        return cls(0, 0, 0)

    @property
    def known(self) -> bool:
        return self.prompt_tokens is not None and self.completion_tokens is not None

    def __add__(self, other: TokenUsage) -> TokenUsage:
        return TokenUsage(
            _add_optional(self.prompt_tokens, other.prompt_tokens),
            _add_optional(self.completion_tokens, other.completion_tokens),
            _add_optional(self.total_tokens, other.total_tokens),
        )


def sum_usage(usages: Iterable[TokenUsage]) -> TokenUsage:
    total = TokenUsage.zero()
    for usage in usages:
        total = total + usage
    return total


@dataclass(frozen=True)
class LedgerEntry:
    kind: PromptKind
    round: int
    usage: TokenUsage


@dataclass(frozen=True)
class CostLedger:
    """Per-call token entries for one session, in call order."""

    entries: tuple[LedgerEntry, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))

    def total(self) -> TokenUsage:
        return sum_usage(e.usage for e in self.entries)

    def totals_by_kind(self) -> dict[PromptKind, TokenUsage]:
        out: dict[PromptKind, TokenUsage] = {}
        for e in self.entries:
            out[e.kind] = out.get(e.kind, TokenUsage.zero()) + e.usage
        return out

    def calls_by_kind(self) -> dict[PromptKind, int]:
        out: dict[PromptKind, int] = {}
        for e in self.entries:
            out[e.kind] = out.get(e.kind, 0) + 1
        return out

    def usage_for_round(self, round: int) -> TokenUsage:
        return sum_usage(e.usage for e in self.entries if e.round == round)

    def cost(self, prompt_per_1k: float, completion_per_1k: float) -> float | None:
        """Monetary cost, or ``None`` when any entry lacks token components."""
        total = self.total()
        if not total.known:
            return None
        assert total.prompt_tokens is not None and total.completion_tokens is not None
        return total.prompt_tokens * prompt_per_1k / 1000 + total.completion_tokens * completion_per_1k / 1000

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class IterationRecord:
    round: int
    candidate: Answer
    accepted: bool
    tokens: TokenUsage = field(default_factory=TokenUsage.zero)
    defect: DefectReport | None = None
    vote: Vote | None = None

    def __post_init__(self) -> None:
        if self.round < 1:
            raise InvalidTranscript(f"record round must be >= 1, got {self.round}")
        if self.candidate.round != self.round:
            raise InvalidTranscript(
                f"candidate round {self.candidate.round} does not match record round {self.round}"
            )
        if self.defect is not None and self.defect.round != self.round:
            raise InvalidTranscript(f"defect round {self.defect.round} does not match record round {self.round}")


def accept_rule(mode: RefinementMode, vote: Vote | None) -> bool:
    """Greedy acceptance: a candidate replaces the incumbent only on a "2" verdict.

    Reckless mode has no vote and accepts everything.
    """
    if mode is RefinementMode.RECKLESS:
        if vote is not None:
            raise ValueError("reckless mode never votes")
        return True
    if vote is None:
        raise ValueError(f"{mode.value} mode requires a vote")
    return vote is Vote.CANDIDATE


def replay_final(initial: Answer, records: Iterable[IterationRecord]) -> Answer:
    """Fold the acceptance decisions over ``records`` starting from ``initial``."""
    incumbent = initial
    for record in records:
        if record.accepted:
            incumbent = record.candidate
    return incumbent


@dataclass(frozen=True)
class Transcript:
    """Audit trail of one refinement session.

    Construction checks the structural invariants, so a transcript read back
    from disk is as trustworthy as one produced by the engine.
    """

    query: Query
    mode: RefinementMode
    initial: Answer
    records: tuple[IterationRecord, ...]
    final: Answer
    stop_reason: StopReason
    ledger: CostLedger = field(default_factory=CostLedger)
    model: str = ""
    error: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        self._check()

    def _check(self) -> None:
        if self.initial.round != 0:
            raise InvalidTranscript(f"initial answer must have round 0, got {self.initial.round}")
        if len(self.records) > self.query.max_iterations:
            raise InvalidTranscript(
                f"{len(self.records)} records exceed max_iterations={self.query.max_iterations}"
            )
        for expected, record in enumerate(self.records, start=1):
            if record.round != expected:
                raise InvalidTranscript(f"record rounds must be consecutive from 1; got {record.round} at {expected}")
            if self.mode.votes != (record.vote is not None):
                raise InvalidTranscript(f"round {record.round}: vote presence does not match mode {self.mode.value}")
            if self.mode.analyzes_defects != (record.defect is not None):
                raise InvalidTranscript(
                    f"round {record.round}: defect presence does not match mode {self.mode.value}"
                )
            if record.accepted != accept_rule(self.mode, record.vote):
                raise InvalidTranscript(f"round {record.round}: accepted flag contradicts the vote")
        if replay_final(self.initial, self.records) != self.final:
            raise InvalidTranscript("final answer is not the last accepted candidate")
        if self.stop_reason in (StopReason.VOTE_REJECTED, StopReason.VOTE_TIE):
            if not self.records or self.records[-1].accepted:
                raise InvalidTranscript(f"{self.stop_reason.value} requires a rejected last record")
            expected_vote = Vote.TIE if self.stop_reason is StopReason.VOTE_TIE else Vote.PREVIOUS
            if self.records[-1].vote is not expected_vote:
                raise InvalidTranscript(f"{self.stop_reason.value} does not match the last vote")
        if self.stop_reason is StopReason.MAX_ITERATIONS and len(self.records) != self.query.max_iterations:
            raise InvalidTranscript("max_iterations stop before the iteration cap was reached")
        if self.stop_reason is StopReason.MAX_ITERATIONS and self.records and not self.records[-1].accepted:
            raise InvalidTranscript("max_iterations stop after a rejected candidate")
