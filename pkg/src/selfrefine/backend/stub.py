"""A local OpenAI-compatible server that replays canned responses.

Used to check the HTTP client against real sockets without a network.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any


@dataclass(frozen=True)
class StubReply:
    status: int = 200
    body: Any = field(default_factory=dict)

    @classmethod
    def completion(
        cls,
        content: str,
        prompt_tokens: int | None = None,
        completion_tokens: int | None = None,
        model: str = "stub",
    ) -> StubReply:
        body: dict[str, Any] = {
            "model": model,
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
        }
        if prompt_tokens is not None and completion_tokens is not None:
            body["usage"] = {
                "prompt_tokens": prompt_tokens,
                "completion_tokens": completion_tokens,
                "total_tokens": prompt_tokens + completion_tokens,
            }
        return cls(200, body)

    def encode(self) -> bytes:
        if isinstance(self.body, bytes):
            return self.body
        if isinstance(self.body, str):
            return self.body.encode("utf-8")
        return json.dumps(self.body).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    server: _StubHTTPServer

    def log_message(self, format: str, *args: object) -> None:
        return

    def _send(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self) -> None:  # noqa: N802
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        stub = self.server.stub
        with stub._lock:
            try:
                recorded: Any = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                recorded = raw
            stub.requests.append(recorded)
            stub.headers.append(dict(self.headers))
            if not self.path.rstrip("/").endswith("/chat/completions"):
                self._send(404, json.dumps({"error": {"message": f"no route {self.path}"}}).encode())
                return
            index = len(stub.requests) - 1
            if index >= len(stub.fixtures):
                message = f"stub has {len(stub.fixtures)} fixtures; request #{index + 1} has none"
                self._send(500, json.dumps({"error": {"message": message}}).encode())
                return
            reply = stub.fixtures[index]
        self._send(reply.status, reply.encode())


class _StubHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    stub: StubServer


class StubServer:
    """Serves ``fixtures`` in order on ``POST {base_url}/chat/completions``.

    Received bodies are kept in ``requests`` (parsed JSON). Requests past the
    last fixture get a 500 with a diagnostic body. Use as a context manager.
    """

    def __init__(self, fixtures: list[StubReply], host: str = "127.0.0.1", port: int = 0) -> None:
        if not fixtures:
            raise ValueError("stub server needs at least one fixture")
        self.fixtures = list(fixtures)
        self.requests: list[Any] = []
        self.headers: list[dict[str, str]] = []
        self._lock = threading.Lock()
        self._httpd = _StubHTTPServer((host, port), _Handler)
        self._httpd.stub = self
        self._thread = threading.Thread(target=self._httpd.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1"

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> StubServer:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def stub_serve(fixtures: list[StubReply], host: str = "127.0.0.1", port: int = 0) -> StubServer:
    return StubServer(fixtures, host, port)
