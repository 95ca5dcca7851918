"""Chat-completion gateway with a content-addressed disk cache.

One OpenAI-compatible wire format covers every endpoint. Responses are cached
by a digest of (model, temperature, max_output_tokens, system, user) so a
re-run of a finished pipeline performs zero network calls, and an interrupted
70k-call run resumes where it stopped. A scriptable mock transport stands in
for the network during tests and offline runs.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import (
    ConfigError,
    ProtocolError,
    RetryableTransportError,
    TransportError,
)
from .storage import atomic_write_text

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class ModelSpec:
    name: str
    endpoint_url: str = ""
    api_key_env: str = ""
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self):
        if not self.name:
            raise ConfigError("model name must be non-empty")
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class ChatRequest:
    model: ModelSpec
    system: str
    user: str

    def __post_init__(self):
        if not self.user:
            raise ValueError("user prompt must be non-empty")


@dataclass
class ChatResponse:
    text: str
    cached: bool
    latency_ms: int


def cache_key(req: ChatRequest) -> str:
    """Stable digest over everything that determines the model reply."""
    payload = json.dumps(
        [req.model.name, req.model.temperature, req.model.max_output_tokens, req.system, req.user],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class HttpTransport:
    """POSTs OpenAI-compatible chat-completion bodies; bearer token from env."""

    def __init__(self, timeout: float = 120.0):
        self.timeout = timeout
        self.calls = 0
        self._lock = threading.Lock()

    def send(self, req: ChatRequest) -> str:
        with self._lock:
            self.calls += 1
        headers = {"Content-Type": "application/json"}
        if req.model.api_key_env:
            api_key = os.environ.get(req.model.api_key_env)
            if not api_key:
                raise ConfigError(f"environment variable {req.model.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {api_key}"
        if not req.model.endpoint_url:
            raise ConfigError(f"model {req.model.name} has no endpoint_url")
        body = {
            "model": req.model.name,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": req.model.temperature,
            "max_tokens": req.model.max_output_tokens,
        }
        try:
            resp = requests.post(req.model.endpoint_url, json=body, headers=headers, timeout=self.timeout)
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise RetryableTransportError(f"request to {req.model.endpoint_url} failed: {exc}") from exc
        if resp.status_code in RETRYABLE_STATUS:
            raise RetryableTransportError(f"HTTP {resp.status_code} from {req.model.endpoint_url}")
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code} from {req.model.endpoint_url}: {resp.text[:200]}")
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat-completion body: {exc}") from exc
        if not isinstance(text, str):
            raise ProtocolError("chat-completion content is not a string")
        return text


class MockTransport:
    """Scripted stand-in for HttpTransport.

    The script is a list of entries {"match": <substring of the user
    prompt>, "response": <text>}; an empty match matches everything. A
    request is served by the first match string (in script order) found in
    its user prompt; entries sharing that match string are consumed
    first-in-first-out, and once exhausted the last one keeps serving (so a
    single entry can answer an entire stage, and specific-before-generic
    scripts stay stable). An entry may carry "error": true / "<message>" to
    raise a retryable failure instead, or "error": "protocol" for a
    non-retryable one.
    """

    def __init__(self, entries: list[dict]):
        for i, e in enumerate(entries):
            if "match" not in e or ("response" not in e and not e.get("error")):
                raise ConfigError(f"mock script entry {i} needs 'match' and 'response' (or 'error')")
        self._groups: dict[str, list[dict]] = {}
        for e in entries:
            self._groups.setdefault(e["match"], []).append(dict(e, consumed=False))
        self.calls = 0
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "MockTransport":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"mock script {path} line {lineno}: {exc}") from exc
        return cls(entries)

    def send(self, req: ChatRequest) -> str:
        with self._lock:
            self.calls += 1
            self.requests.append(req)
            chosen = None
            for match, group in self._groups.items():
                if match in req.user:
                    chosen = next((e for e in group if not e["consumed"]), group[-1])
                    break
            if chosen is None:
                raise TransportError(f"no mock script entry matches user prompt: {req.user[:80]!r}")
            chosen["consumed"] = True
        error = chosen.get("error")
        if error:
            if error == "protocol":
                raise ProtocolError("mock protocol error")
            message = error if isinstance(error, str) else "mock transport failure"
            raise RetryableTransportError(message)
        return chosen["response"]


class Gateway:
    """complete() with caching, bounded concurrency, and retry with backoff."""

    def __init__(
        self,
        cache_dir: str | Path,
        transport,
        max_attempts: int = 5,
        backoff_base: float = 1.0,
        backoff_factor: float = 2.0,
        backoff_jitter: float = 0.1,
        max_concurrency: int = 8,
        sleep=time.sleep,
        rng: random.Random | None = None,
    ):
        self.cache_dir = Path(cache_dir)
        self.transport = transport
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self.backoff_jitter = backoff_jitter
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._sem = threading.Semaphore(max_concurrency)
        self._lock = threading.Lock()
        self.retries_total = 0

    def _cache_path(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.json"

    def _cache_read(self, key: str) -> str | None:
        path = self._cache_path(key)
        try:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)["response"]
        except FileNotFoundError:
            return None
        except (json.JSONDecodeError, KeyError):
            logger.warning("discarding corrupt cache entry %s", path)
            return None

    def _cache_write(self, key: str, req: ChatRequest, text: str) -> None:
        entry = {
            "key": key,
            "request": {
                "model": req.model.name,
                "temperature": req.model.temperature,
                "max_output_tokens": req.model.max_output_tokens,
                "system": req.system,
                "user": req.user,
            },
            "response": text,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        atomic_write_text(self._cache_path(key), json.dumps(entry, ensure_ascii=False, indent=2))

    def complete(self, req: ChatRequest) -> ChatResponse:
        key = cache_key(req)
        cached = self._cache_read(key)
        if cached is not None:
            return ChatResponse(text=cached, cached=True, latency_ms=0)
        with self._sem:
            last_exc: Exception | None = None
            for attempt in range(self.max_attempts):
                if attempt:
                    delay = self.backoff_base * self.backoff_factor ** (attempt - 1)
                    delay *= 1.0 + self.backoff_jitter * self._rng.random()
                    self._sleep(delay)
                    with self._lock:
                        self.retries_total += 1
                start = time.monotonic()
                try:
                    text = self.transport.send(req)
                    latency_ms = int((time.monotonic() - start) * 1000)
                    break
                except RetryableTransportError as exc:
                    last_exc = exc
                    logger.warning("attempt %d/%d failed: %s", attempt + 1, self.max_attempts, exc)
            else:
                raise TransportError(
                    f"gave up after {self.max_attempts} attempts: {last_exc}"
                ) from last_exc
        self._cache_write(key, req, text)
        return ChatResponse(text=text, cached=False, latency_ms=latency_ms)
