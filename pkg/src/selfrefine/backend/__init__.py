from .base import (
    DEFAULT_TEMPERATURES,
    Backend,
    ChatMessage,
    ChatRequest,
    ChatResponse,
    parse_completion,
    parse_usage,
)
from .http import HttpBackend, HttpConfig, http_send
from .scripted import BackendScript, ScriptedBackend, ScriptedReply, scripted_next
from .stub import StubReply, StubServer, stub_serve

__all__ = [
    "DEFAULT_TEMPERATURES",
    "Backend",
    "BackendScript",
    "ChatMessage",
    "ChatRequest",
    "ChatResponse",
    "HttpBackend",
    "HttpConfig",
    "ScriptedBackend",
    "ScriptedReply",
    "StubReply",
    "StubServer",
    "http_send",
    "parse_completion",
    "parse_usage",
    "scripted_next",
    "stub_serve",
]
