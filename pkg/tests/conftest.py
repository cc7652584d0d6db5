"""Shared fixtures: a local OpenAI-compatible stub server and tiny embedders."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from lexichain.lexicon import EmbeddingVector


@dataclass
class StubState:
    """What the stub server should answer, plus what it observed."""

    chat_content: str = "stub translation"
    embed_dim: int = 8
    # queue of status codes to serve before succeeding (simulates flakiness)
    status_queue: list[int] = field(default_factory=list)
    delay_s: float = 0.0
    requests: list[dict] = field(default_factory=list)
    in_flight: int = 0
    peak_in_flight: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


class _StubHandler(BaseHTTPRequestHandler):
    state: StubState  # set by the fixture

    def log_message(self, *args):  # keep pytest output clean
        pass

    def do_POST(self):
        state = self.state
        with state.lock:
            state.in_flight += 1
            state.peak_in_flight = max(state.peak_in_flight, state.in_flight)
            queued_status = state.status_queue.pop(0) if state.status_queue else 200
        try:
            if state.delay_s:
                time.sleep(state.delay_s)
            length = int(self.headers.get("Content-Length", 0))
            payload = json.loads(self.rfile.read(length) or b"{}")
            with state.lock:
                state.requests.append({"path": self.path, "payload": payload})
            if queued_status != 200:
                self.send_response(queued_status)
                self.end_headers()
                return
            if self.path.endswith("/chat/completions"):
                body = {
                    "choices": [{"message": {"role": "assistant", "content": state.chat_content}}],
                    "usage": {"prompt_tokens": 7, "completion_tokens": 3},
                }
            elif self.path.endswith("/embeddings"):
                words = payload.get("input", [])
                body = {
                    "data": [
                        {"index": i, "embedding": [float(i + 1)] + [0.5] * (state.embed_dim - 1)}
                        for i in range(len(words))
                    ]
                }
            else:
                self.send_response(404)
                self.end_headers()
                return
            raw = json.dumps(body).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)
        finally:
            with state.lock:
                state.in_flight -= 1


@pytest.fixture
def stub_server():
    state = StubState()
    handler = type("Handler", (_StubHandler,), {"state": state})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}", state
    finally:
        server.shutdown()
        thread.join(timeout=5)


class FixedEmbedder:
    """Deterministic test embedder with caller-chosen vectors."""

    def __init__(self, table: dict[str, tuple[float, ...]], default_dim: int | None = None):
        self.table = dict(table)
        self.default_dim = default_dim
        self.calls: list[tuple[str, ...]] = []

    @property
    def embedder_id(self) -> str:
        return "fixed-test-embedder"

    def embed(self, words):
        self.calls.append(tuple(words))
        vectors = []
        for word in words:
            if word in self.table:
                vectors.append(EmbeddingVector(tuple(self.table[word])))
            elif self.default_dim is not None:
                vectors.append(EmbeddingVector((1.0,) + (0.0,) * (self.default_dim - 1)))
            else:
                raise KeyError(f"no fixed vector for {word!r}")
        return vectors


@pytest.fixture
def fixed_embedder():
    return FixedEmbedder
