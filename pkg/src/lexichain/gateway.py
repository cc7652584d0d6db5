"""Chat-completion and embedding backends.

``HttpBackend`` speaks the OpenAI-compatible wire protocol (POST
/v1/chat/completions and /v1/embeddings) with bounded retries and a
concurrency cap. ``MockBackend`` replays a deterministic script so the whole
pipeline can run offline in tests.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import httpx

from .errors import ProtocolError, ScriptExhaustedError, TransportError
from .lexicon import EmbeddingVector

MOCK_EMBED_DIM = 32
_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self):
        if not self.messages:
            raise ValueError("chat request needs at least one message")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("first message must be system or user")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def text(self) -> str:
        """All message contents joined; what mock matchers search in."""
        return "\n".join(message.content for message in self.messages)

    def to_wire(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_s: float = 0.0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be >= 0")


class LlmBackend(Protocol):
    """Chat completion plus embedding access behind one handle."""

    @property
    def model(self) -> str: ...

    @property
    def embedder_id(self) -> str: ...

    def complete(self, request: ChatRequest) -> ChatResponse: ...

    def embed(self, words: Sequence[str]) -> list[EmbeddingVector]: ...


def resolve_api_key(value: str | None) -> str | None:
    """Support ``env:NAME`` indirection so keys stay out of config files."""
    if value and value.startswith("env:"):
        return os.environ.get(value[4:])
    return value


@dataclass
class GatewayConfig:
    base_url: str
    api_key: str | None = None
    model: str = "Meta-Llama-3.1-8B-Instruct"
    embed_model: str = "bge-m3"
    timeout_s: float = 30.0
    max_concurrency: int = 4
    retries: int = 2  # extra attempts after the first
    backoff_s: float = 0.5

    @classmethod
    def from_env(cls) -> "GatewayConfig":
        base_url = os.environ.get("LEXICHAIN_BASE_URL", "")
        return cls(base_url=base_url, api_key=os.environ.get("LEXICHAIN_API_KEY"))


class HttpBackend:
    """OpenAI-compatible HTTP client with retries and an in-flight bound."""

    def __init__(self, config: GatewayConfig, trace: list | None = None):
        if not config.base_url:
            raise ValueError("base_url is required for the HTTP backend")
        self.config = config
        self.trace = trace
        self._semaphore = threading.BoundedSemaphore(config.max_concurrency)
        self._client = httpx.Client(timeout=config.timeout_s)

    @property
    def model(self) -> str:
        return self.config.model

    @property
    def embedder_id(self) -> str:
        return self.config.embed_model

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = resolve_api_key(self.config.api_key)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> tuple[dict, float]:
        url = self.config.base_url.rstrip("/") + path
        attempts = self.config.retries + 1
        last_error: str = "no attempt made"
        last_status: int | None = None
        with self._semaphore:
            for attempt in range(attempts):
                if attempt:
                    time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
                started = time.perf_counter()
                try:
                    response = self._client.post(url, json=payload, headers=self._headers())
                except httpx.TimeoutException as exc:
                    last_error = f"timeout: {exc}"
                    continue
                except httpx.TransportError as exc:
                    last_error = f"connection failed: {exc}"
                    continue
                latency = time.perf_counter() - started
                if response.status_code == 200:
                    try:
                        body = response.json()
                    except ValueError as exc:
                        raise ProtocolError(f"non-JSON response from {url}: {exc}") from exc
                    if self.trace is not None:
                        self.trace.append({"request": payload, "response": body})
                    return body, latency
                last_status = response.status_code
                last_error = f"HTTP {response.status_code}"
                if response.status_code != 429 and response.status_code < 500:
                    raise TransportError(
                        f"{url} answered {response.status_code}", status=response.status_code
                    )
        raise TransportError(
            f"{url} failed after {attempts} attempts ({last_error})", status=last_status
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        body, latency = self._post("/v1/chat/completions", request.to_wire())
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat completion body: {body!r}") from exc
        usage = body.get("usage") or {}
        return ChatResponse(
            content=content,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency_s=latency,
        )

    def embed(self, words: Sequence[str]) -> list[EmbeddingVector]:
        if not words:
            raise ValueError("embed needs at least one word")
        payload = {"model": self.config.embed_model, "input": list(words)}
        body, _ = self._post("/v1/embeddings", payload)
        try:
            data = sorted(body["data"], key=lambda item: item["index"])
            vectors = [EmbeddingVector(tuple(item["embedding"])) for item in data]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed embeddings body: {body!r}") from exc
        if len(vectors) != len(words):
            raise ProtocolError(f"asked for {len(words)} embeddings, got {len(vectors)}")
        return vectors


def mock_embedding(word: str, dim: int = MOCK_EMBED_DIM) -> EmbeddingVector:
    """Deterministic unit vector derived from the word's SHA-256 digest.

    Stable across runs and platforms; distinct words land in improbable-to-
    collide directions, which is what retrieval tests need.
    """
    seed = int.from_bytes(hashlib.sha256(word.encode("utf-8")).digest()[:8], "big")
    rng = random.Random(seed)
    raw = [rng.gauss(0.0, 1.0) for _ in range(dim)]
    norm = math.sqrt(sum(v * v for v in raw))
    if norm == 0.0:  # astronomically unlikely, but keep the contract total
        raw[0], norm = 1.0, 1.0
    return EmbeddingVector(tuple(v / norm for v in raw))


@dataclass
class MockRule:
    """One scripted response; fires at most once.

    ``contains`` restricts the rule to requests whose joined message text
    includes the substring; ``position`` restricts it to the Nth completion
    call (0-based). A rule with neither matches any request, giving plain
    sequence semantics.
    """

    response: str
    contains: str | None = None
    position: int | None = None
    consumed: bool = False

    def matches(self, text: str, call_index: int) -> bool:
        if self.consumed:
            return False
        if self.contains is not None and self.contains not in text:
            return False
        if self.position is not None and self.position != call_index:
            return False
        return True


class MockScript:
    """An ordered list of rules; the first match wins and is consumed."""

    def __init__(self, rules: Iterable[MockRule | str] = ()):
        self.rules: list[MockRule] = [
            rule if isinstance(rule, MockRule) else MockRule(response=rule) for rule in rules
        ]

    @classmethod
    def from_file(cls, path: str | Path) -> "MockScript":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if isinstance(data, dict):
            data = data.get("rules", [])
        rules: list[MockRule | str] = []
        for item in data:
            if isinstance(item, str):
                rules.append(item)
            else:
                rules.append(
                    MockRule(
                        response=item["response"],
                        contains=item.get("contains"),
                        position=item.get("position"),
                    )
                )
        return cls(rules)

    def take(self, text: str, call_index: int) -> str:
        for rule in self.rules:
            if rule.matches(text, call_index):
                rule.consumed = True
                return rule.response
        raise ScriptExhaustedError(
            f"no mock rule matches call #{call_index}: {text[:120]!r}"
        )

    @property
    def remaining(self) -> int:
        return sum(1 for rule in self.rules if not rule.consumed)


def _token_estimate(text: str) -> int:
    return max(1, len(text) // 4)


class MockBackend:
    """Scripted chat backend plus hash-derived embeddings, fully offline."""

    model = "mock-chat"
    embedder_id = f"mock-sha256-d{MOCK_EMBED_DIM}"

    def __init__(self, script: MockScript | None = None, trace: list | None = None):
        self.script = script or MockScript()
        self.trace = trace
        self.call_log: list[ChatRequest] = []
        self.embed_log: list[tuple[str, ...]] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        text = request.text()
        with self._lock:
            call_index = len(self.call_log)
            content = self.script.take(text, call_index)
            self.call_log.append(request)
        if self.trace is not None:
            self.trace.append({"request": request.to_wire(), "response": content})
        return ChatResponse(
            content=content,
            prompt_tokens=_token_estimate(text),
            completion_tokens=_token_estimate(content),
            latency_s=0.0,
        )

    def embed(self, words: Sequence[str]) -> list[EmbeddingVector]:
        if not words:
            raise ValueError("embed needs at least one word")
        with self._lock:
            self.embed_log.append(tuple(words))
        return [mock_embedding(word) for word in words]


@dataclass
class CallRecord:
    prompt_tokens: int
    completion_tokens: int
    latency_s: float


class MeteredBackend:
    """Per-sentence wrapper that tallies the calls made through it."""

    def __init__(self, inner: LlmBackend):
        self.inner = inner
        self.calls: list[CallRecord] = []
        self.embedded_words = 0

    @property
    def model(self) -> str:
        return self.inner.model

    @property
    def embedder_id(self) -> str:
        return self.inner.embedder_id

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        self.calls.append(
            CallRecord(response.prompt_tokens, response.completion_tokens, response.latency_s)
        )
        return response

    def embed(self, words: Sequence[str]) -> list[EmbeddingVector]:
        vectors = self.inner.embed(words)
        self.embedded_words += len(words)
        return vectors
