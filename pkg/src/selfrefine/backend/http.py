"""Client for OpenAI-compatible ``/chat/completions`` endpoints."""

from __future__ import annotations

import json
import logging
import os
import random
import socket
import time
import urllib.error
import urllib.request
from collections.abc import Callable
from dataclasses import dataclass, field

from ..errors import (
    AuthError,
    BackendError,
    ConfigError,
    MalformedResponse,
    RateLimited,
    RequestRejected,
    ServerError,
    TransportError,
)
from .base import ChatRequest, ChatResponse, parse_completion

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com/v1"


@dataclass
class HttpConfig:
    base_url: str
    api_key: str
    timeout: float = 60.0
    max_attempts: int = 5
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)
    rng: random.Random = field(default_factory=random.Random, repr=False)

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ConfigError("base URL is required")
        if not self.api_key:
            raise ConfigError("API key is required (set REFINE_API_KEY or OPENAI_API_KEY)")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")

    @classmethod
    def from_env(cls, base_url: str | None = None, **kwargs) -> HttpConfig:
        key = os.environ.get("REFINE_API_KEY") or os.environ.get("OPENAI_API_KEY") or ""
        url = base_url or os.environ.get("REFINE_BASE_URL") or DEFAULT_BASE_URL
        return cls(base_url=url, api_key=key, **kwargs)

    @property
    def endpoint(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"

    def backoff_cap(self, retry: int) -> float:
        """Upper bound of the jittered delay before retry number ``retry`` (0-based)."""
        return self.backoff_base * self.backoff_factor**retry


def _post(config: HttpConfig, payload: bytes) -> tuple[int, bytes]:
    req = urllib.request.Request(
        config.endpoint,
        data=payload,
        method="POST",
        headers={
            "Content-Type": "application/json",
            "Authorization": f"Bearer {config.api_key}",
        },
    )
    try:
        with urllib.request.urlopen(req, timeout=config.timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()
    except (urllib.error.URLError, socket.timeout, ConnectionError) as exc:
        raise TransportError(f"POST {config.endpoint} failed: {exc}") from exc


def _status_error(status: int, body: bytes) -> BackendError:
    snippet = body[:200].decode("utf-8", "replace")
    if status in (401, 403):
        return AuthError(f"HTTP {status}: {snippet}")
    if status == 429:
        return RateLimited(f"HTTP 429: {snippet}", status)
    if status >= 500:
        return ServerError(f"HTTP {status}: {snippet}", status)
    return RequestRejected(f"HTTP {status}: {snippet}", status)


def http_send(request: ChatRequest, config: HttpConfig) -> ChatResponse:
    """POST one request, retrying 429 and 5xx with full-jitter exponential backoff."""
    payload = json.dumps(request.to_wire()).encode("utf-8")
    started = time.perf_counter()
    for attempt in range(1, config.max_attempts + 1):
        status, body = _post(config, payload)
        if status == 200:
            try:
                decoded = json.loads(body.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise MalformedResponse(f"response is not JSON: {exc}") from exc
            content, usage, model = parse_completion(decoded)
            return ChatResponse(
                content,
                usage,
                model or request.model,
                latency=time.perf_counter() - started,
                attempts=attempt,
            )
        error = _status_error(status, body)
        if not isinstance(error, ServerError) or attempt == config.max_attempts:
            raise error
        delay = config.rng.uniform(0, config.backoff_cap(attempt - 1))
        logger.warning("attempt %d/%d got HTTP %d, retrying in %.2fs", attempt, config.max_attempts, status, delay)
        config.sleep(delay)
    raise AssertionError("unreachable")


class HttpBackend:
    def __init__(self, config: HttpConfig) -> None:
        self.config = config

    def complete(self, request: ChatRequest) -> ChatResponse:
        return http_send(request, self.config)
