from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Protocol

from ..domain import PromptKind, TokenUsage
from ..errors import MalformedResponse

ROLES = ("user", "system", "assistant")

# Judging and analysis run cold; generation gets some diversity.
DEFAULT_TEMPERATURES: dict[PromptKind, float] = {
    PromptKind.INITIAL_ANSWER: 0.7,
    PromptKind.DEFECT_ANALYSIS: 0.0,
    PromptKind.GUIDED_OPTIMIZATION: 0.7,
    PromptKind.BLIND_OPTIMIZATION: 0.7,
    PromptKind.VOTE: 0.0,
}


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not isinstance(self.content, str) or not self.content:
            raise ValueError("message content must be a non-empty string")


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    # Local routing metadata; never sent over the wire.
    kind: PromptKind | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if isinstance(self.temperature, bool) or not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature must lie in [0, 2], got {self.temperature}")

    @classmethod
    def single(cls, model: str, content: str, *, temperature: float = 0.0, kind: PromptKind | None = None) -> ChatRequest:
        """A fresh one-message conversation, the only shape the engine sends."""
        return cls(model, (ChatMessage("user", content),), temperature, kind)

    def to_wire(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
        }

    @classmethod
    def from_wire(cls, body: Mapping[str, Any], kind: PromptKind | None = None) -> ChatRequest:
        """Strict inverse of :meth:`to_wire`; unknown keys are rejected."""
        if set(body) != {"model", "messages", "temperature"}:
            raise ValueError(f"unexpected request keys {sorted(body)}")
        if not isinstance(body["model"], str) or not isinstance(body["messages"], list):
            raise ValueError("model must be a string and messages a list")
        temperature = body["temperature"]
        if isinstance(temperature, bool) or not isinstance(temperature, (int, float)):
            raise ValueError("temperature must be a number")
        messages = []
        for m in body["messages"]:
            if not isinstance(m, dict) or set(m) != {"role", "content"}:
                raise ValueError(f"malformed message {m!r}")
            messages.append(ChatMessage(m["role"], m["content"]))
        return cls(body["model"], tuple(messages), float(temperature), kind)

    @property
    def last_content(self) -> str:
        return self.messages[-1].content


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: TokenUsage = field(default_factory=TokenUsage)
    model: str = ""
    latency: float = 0.0
    attempts: int = 1


class Backend(Protocol):
    """Anything that turns one chat request into one reply.

    Implementations keep no conversation state between calls and must
    tolerate concurrent ``complete`` calls from different sessions.
    """

    def complete(self, request: ChatRequest) -> ChatResponse: ...


def _int_or_none(value: Any, name: str) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise MalformedResponse(f"usage.{name} must be a non-negative integer, got {value!r}")
    return value


def parse_usage(raw: Any) -> TokenUsage:
    """Read an OpenAI-style usage object; absent fields stay unknown."""
    if raw is None:
        return TokenUsage()
    if not isinstance(raw, dict):
        raise MalformedResponse(f"usage must be an object, got {type(raw).__name__}")
    prompt = _int_or_none(raw.get("prompt_tokens"), "prompt_tokens")
    completion = _int_or_none(raw.get("completion_tokens"), "completion_tokens")
    total = _int_or_none(raw.get("total_tokens"), "total_tokens")
    try:
        return TokenUsage(prompt, completion, total)
    except ValueError as exc:
        raise MalformedResponse(f"inconsistent usage: {exc}") from exc


def parse_completion(body: Any) -> tuple[str, TokenUsage, str]:
    """Extract ``(content, usage, model)`` from a chat-completion response body."""
    if not isinstance(body, dict):
        raise MalformedResponse("response body is not a JSON object")
    choices = body.get("choices")
    if not isinstance(choices, list) or not choices:
        raise MalformedResponse("response has no choices")
    first = choices[0]
    message = first.get("message") if isinstance(first, dict) else None
    content = message.get("content") if isinstance(message, dict) else None
    if not isinstance(content, str):
        raise MalformedResponse("choices[0].message.content is missing or not a string")
    model = body.get("model", "")
    return content, parse_usage(body.get("usage")), model if isinstance(model, str) else ""
