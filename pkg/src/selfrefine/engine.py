"""The refinement loop.

One session: ask the question, then per round analyze the incumbent's
defects, ask for an improved answer, and let the model vote between the
incumbent and the candidate. A winning candidate becomes the incumbent and
the loop repeats; a loss or a tie ends the session with the incumbent.

Every call is built only from the question, the incumbent and the current
round's defect sentence, and is sent as a fresh single-message
conversation, so per-round request size does not grow with the round index.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

from .backend.base import DEFAULT_TEMPERATURES, Backend, ChatRequest
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
    Transcript,
    TokenUsage,
    Vote,
    accept_rule,
    sum_usage,
)
from .errors import BackendError, MalformedResponse, MissingDefect, UnparseableVote
from .prompts import (
    PromptText,
    render_blind_optimization,
    render_defect,
    render_guided_optimization,
    render_initial,
    render_vote,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Observer",
    "SessionState",
    "Settings",
    "accept_rule",
    "parse_vote",
    "run_session",
    "step",
]

DEFAULT_MODEL = "gpt-3.5-turbo"

_LABEL_TOKEN = re.compile(r"(?<![^\W_])[012](?![^\W_])")

# Observer(kind, round, prompt, reply) is called after every model call.
Observer = Callable[[PromptKind, int, str, str], None]


def parse_vote(raw: str) -> Vote:
    """Map a vote reply to a verdict.

    A bare "0"/"1"/"2" is taken as is. Otherwise the reply must contain
    exactly one distinct label standing alone (bounded by non-alphanumerics
    or the string ends), as in "2." or "I think 2 is better".
    """
    stripped = raw.strip()
    if stripped in ("0", "1", "2"):
        return Vote(stripped)
    labels = set(_LABEL_TOKEN.findall(raw))
    if len(labels) != 1:
        raise UnparseableVote(raw)
    return Vote(labels.pop())


@dataclass(frozen=True)
class Settings:
    model: str = DEFAULT_MODEL
    temperatures: Mapping[PromptKind, float] = field(default_factory=lambda: dict(DEFAULT_TEMPERATURES))

    def temperature(self, kind: PromptKind) -> float:
        return self.temperatures.get(kind, DEFAULT_TEMPERATURES[kind])


@dataclass(frozen=True)
class SessionState:
    query: Query
    incumbent: Answer
    round: int
    mode: RefinementMode

    def __post_init__(self) -> None:
        if not 0 <= self.round <= self.query.max_iterations:
            raise ValueError(f"round {self.round} outside [0, {self.query.max_iterations}]")

    @property
    def finished_by_cap(self) -> bool:
        return self.round >= self.query.max_iterations


class _Caller:
    """Sends prompts and books one ledger entry per call."""

    def __init__(self, backend: Backend, settings: Settings, observer: Observer | None) -> None:
        self.backend = backend
        self.settings = settings
        self.observer = observer
        self.entries: list[LedgerEntry] = []

    def __call__(self, prompt: PromptText, round: int) -> str:
        request = ChatRequest.single(
            self.settings.model,
            prompt.text,
            temperature=self.settings.temperature(prompt.kind),
            kind=prompt.kind,
        )
        response = self.backend.complete(request)
        self.entries.append(LedgerEntry(prompt.kind, round, response.usage))
        if self.observer is not None:
            self.observer(prompt.kind, round, prompt.text, response.content)
        return response.content

    def usage_since(self, start: int) -> TokenUsage:
        return sum_usage(e.usage for e in self.entries[start:])


def _nonempty(reply: str, what: str) -> str:
    text = reply.strip()
    if not text:
        raise MalformedResponse(f"empty {what} reply")
    return text


def _step(state: SessionState, call: _Caller) -> tuple[SessionState, IterationRecord]:
    if state.finished_by_cap:
        raise ValueError("session already reached max_iterations")
    q, incumbent, mode = state.query, state.incumbent, state.mode
    round = state.round + 1
    start = len(call.entries)

    defect = None
    if mode.analyzes_defects:
        reply = call(render_defect(q, incumbent), round)
        if not reply.strip():
            raise MissingDefect(f"empty defect analysis in round {round}")
        defect = DefectReport(reply.strip(), round)
        prompt = render_guided_optimization(q, incumbent, defect)
    else:
        prompt = render_blind_optimization(q, incumbent)
    candidate = Answer(_nonempty(call(prompt, round), "optimization"), round)

    vote = None
    if mode.votes:
        vote = parse_vote(call(render_vote(q, incumbent, candidate), round))
    accepted = accept_rule(mode, vote)

    record = IterationRecord(round, candidate, accepted, call.usage_since(start), defect, vote)
    new_state = SessionState(q, candidate if accepted else incumbent, round, mode)
    return new_state, record


def step(
    state: SessionState,
    backend: Backend,
    settings: Settings | None = None,
    observer: Observer | None = None,
) -> tuple[SessionState, IterationRecord]:
    """Run one optimization round from ``state``.

    Prompts are built from ``state.query``, ``state.incumbent`` and this
    round's defect only. Backend and vote-parse errors propagate.
    """
    return _step(state, _Caller(backend, settings or Settings(), observer))


def run_session(
    q: Query,
    mode: RefinementMode | str,
    backend: Backend,
    settings: Settings | None = None,
    observer: Observer | None = None,
) -> Transcript:
    """Refine the answer to ``q`` and return the full transcript.

    Never raises for backend trouble: the session stops with
    ``StopReason.BACKEND_ERROR`` and the best answer known so far.
    """
    mode = RefinementMode(mode)
    settings = settings or Settings()
    call = _Caller(backend, settings, observer)
    records: list[IterationRecord] = []
    initial = incumbent = Answer("", 0)
    error: str | None = None
    stop = StopReason.MAX_ITERATIONS

    try:
        initial = Answer(_nonempty(call(render_initial(q), 0), "initial answer"), 0)
        incumbent = initial
        state = SessionState(q, initial, 0, mode)
        while not state.finished_by_cap:
            state, record = _step(state, call)
            records.append(record)
            incumbent = state.incumbent
            if not record.accepted:
                stop = StopReason.VOTE_TIE if record.vote is Vote.TIE else StopReason.VOTE_REJECTED
                break
    except (BackendError, MissingDefect) as exc:
        logger.warning("session %s aborted: %s", q.id, exc)
        stop = StopReason.BACKEND_ERROR
        error = f"{type(exc).__name__}: {exc}"

    return Transcript(
        query=q,
        mode=mode,
        initial=initial,
        records=tuple(records),
        final=incumbent,
        stop_reason=stop,
        ledger=CostLedger(tuple(call.entries)),
        model=settings.model,
        error=error,
    )
