"""Deterministic playback backend for offline runs and tests."""

from __future__ import annotations

import json
import threading
from collections import deque
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..domain import PromptKind, TokenUsage
from ..errors import ConfigError, ScriptExhausted
from ..prompts import classify
from .base import ChatRequest, ChatResponse


@dataclass(frozen=True)
class ScriptedReply:
    content: str
    prompt_tokens: int | None = 0
    completion_tokens: int | None = 0

    @property
    def usage(self) -> TokenUsage:
        return TokenUsage(self.prompt_tokens, self.completion_tokens)


ReplyLike = ScriptedReply | str


def _coerce(reply: ReplyLike) -> ScriptedReply:
    return reply if isinstance(reply, ScriptedReply) else ScriptedReply(reply)


class BackendScript:
    """Per-kind FIFO queues of canned replies."""

    def __init__(self, queues: Mapping[PromptKind, Iterable[ReplyLike]] | None = None) -> None:
        self._queues: dict[PromptKind, deque[ScriptedReply]] = {kind: deque() for kind in PromptKind}
        for kind, replies in (queues or {}).items():
            self._queues[PromptKind(kind)].extend(_coerce(r) for r in replies)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> BackendScript:
        if not isinstance(data, Mapping):
            raise ConfigError("script must be a JSON object keyed by prompt kind")
        queues: dict[PromptKind, list[ScriptedReply]] = {}
        for name, items in data.items():
            try:
                kind = PromptKind(name)
            except ValueError:
                known = ", ".join(k.value for k in PromptKind)
                raise ConfigError(f"unknown script kind {name!r}; expected one of {known}") from None
            if not isinstance(items, list):
                raise ConfigError(f"script entry {name!r} must be a list")
            replies = []
            for item in items:
                if isinstance(item, str):
                    replies.append(ScriptedReply(item))
                elif isinstance(item, dict) and isinstance(item.get("content"), str):
                    replies.append(
                        ScriptedReply(item["content"], item.get("prompt_tokens", 0), item.get("completion_tokens", 0))
                    )
                else:
                    raise ConfigError(f"malformed reply in {name!r}: {item!r}")
            queues[kind] = replies
        return cls(queues)

    @classmethod
    def from_file(cls, path: str | Path) -> BackendScript:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def pop(self, kind: PromptKind) -> ScriptedReply:
        queue = self._queues[kind]
        if not queue:
            raise ScriptExhausted(f"no scripted reply left for {kind.value!r}")
        return queue.popleft()

    def remaining(self, kind: PromptKind) -> int:
        return len(self._queues[kind])


class ScriptedBackend:
    """Replays a :class:`BackendScript`.

    Replies depend only on the request kind and how many replies of that
    kind were already consumed, never on request text. Every request is
    logged in ``requests`` for later inspection.
    """

    def __init__(self, script: BackendScript | Mapping[PromptKind, Iterable[ReplyLike]]) -> None:
        self.script = script if isinstance(script, BackendScript) else BackendScript(script)
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        kind = request.kind or classify(request.last_content)
        with self._lock:
            self.requests.append(request)
            reply = self.script.pop(kind)
        return ChatResponse(reply.content, reply.usage, request.model)


def scripted_next(script: BackendScript, request: ChatRequest) -> ChatResponse:
    return ScriptedBackend(script).complete(request)
