"""Completion gateway with a record/replay cache.

Experiments talk to the model through one narrow interface so that a
finished run can be replayed byte-for-byte without network access. Each
request is fingerprinted over every field that could change the
completion; the cache is a JSONL file mapping fingerprints to recorded
responses.

Policies:

* ``live``: call the provider, never touch the cache.
* ``record``: call the provider and persist the response first.
* ``replay``: serve from the cache only; a miss is an error.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import CacheMissError, ProviderError, RateLimitedError

logger = logging.getLogger(__name__)

DEFAULT_STOP_SEQUENCES = ("Question:", "\n\n", ";")
DEFAULT_MAX_TOKENS = 256

API_BASE_ENV = "SQLPROMPT_API_BASE"
API_KEY_ENV = "SQLPROMPT_API_KEY"

POLICIES = ("live", "record", "replay")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model_name: str
    stop_sequences: tuple[str, ...] = DEFAULT_STOP_SEQUENCES
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = 0.0


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str = "stop"  # stop | length | error
    provider_latency_ms: int = 0


Provider = Callable[[CompletionRequest], CompletionResponse]


def fingerprint_request(request: CompletionRequest) -> str:
    """Stable identity of a request: sha256 over a canonical JSON
    rendering of every completion-relevant field."""
    payload = json.dumps(
        {
            "prompt": request.prompt,
            "model_name": request.model_name,
            "stop_sequences": list(request.stop_sequences),
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ReplayCache:
    """Append-only JSONL store of responses keyed by request fingerprint.

    Later records for the same fingerprint win, so re-recording a run
    simply supersedes old entries.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, CompletionResponse] = {}
        if self.path.is_file():
            self._load()

    def _load(self) -> None:
        with self.path.open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    fingerprint = record["fingerprint"]
                    response = CompletionResponse(
                        text=record["text"],
                        finish_reason=record.get("finish_reason", "stop"),
                        provider_latency_ms=int(record.get("provider_latency_ms", 0)),
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ValueError(
                        f"{self.path}:{line_no}: bad cache record: {exc}"
                    ) from exc
                self._entries[fingerprint] = response

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, fingerprint: str) -> bool:
        return fingerprint in self._entries

    def get(self, fingerprint: str) -> CompletionResponse | None:
        return self._entries.get(fingerprint)

    def put(self, fingerprint: str, response: CompletionResponse) -> None:
        record = {
            "fingerprint": fingerprint,
            "text": response.text,
            "finish_reason": response.finish_reason,
            "provider_latency_ms": response.provider_latency_ms,
        }
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        with self._lock:
            self._entries[fingerprint] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")


class HttpCompletionProvider:
    """Minimal client for an OpenAI-style completions endpoint."""

    def __init__(self, base_url: str, api_key: str = "", timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        import requests  # deferred so offline use never needs it

        self._session = requests.Session()

    @classmethod
    def from_env(cls) -> "HttpCompletionProvider":
        base = os.environ.get(API_BASE_ENV)
        if not base:
            raise ProviderError(
                f"set {API_BASE_ENV} (and usually {API_KEY_ENV}) to reach a "
                "completion endpoint, or run with the replay policy"
            )
        return cls(base_url=base, api_key=os.environ.get(API_KEY_ENV, ""))

    def __call__(self, request: CompletionRequest) -> CompletionResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": request.model_name,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop": list(request.stop_sequences),
        }
        started = time.monotonic()
        response = self._session.post(
            f"{self.base_url}/completions", json=body, headers=headers,
            timeout=self.timeout,
        )
        elapsed_ms = int((time.monotonic() - started) * 1000)
        if response.status_code == 429:
            retry_after = response.headers.get("Retry-After")
            raise RateLimitedError(
                "provider rate limit",
                retry_after=float(retry_after) if retry_after else None,
            )
        if response.status_code >= 400:
            raise ProviderError(
                f"provider returned {response.status_code}: {response.text[:200]}"
            )
        payload = response.json()
        try:
            choice = payload["choices"][0]
            text = choice["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider payload: {exc}") from exc
        finish = choice.get("finish_reason") or "stop"
        return CompletionResponse(
            text=text, finish_reason=finish, provider_latency_ms=elapsed_ms
        )


class LlmGateway:
    """Routes completion requests through the policy and the cache."""

    def __init__(
        self,
        cache: ReplayCache | None = None,
        provider: Provider | None = None,
        max_in_flight: int = 4,
        max_retries: int = 5,
        backoff_base: float = 1.0,
    ):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        self.cache = cache
        self._provider = provider
        self._slots = threading.Semaphore(max_in_flight)
        self.max_retries = max_retries
        self.backoff_base = backoff_base

    def _require_provider(self) -> Provider:
        if self._provider is None:
            self._provider = HttpCompletionProvider.from_env()
        return self._provider

    def _call_with_backoff(self, request: CompletionRequest) -> CompletionResponse:
        provider = self._require_provider()
        attempt = 0
        while True:
            try:
                with self._slots:
                    return provider(request)
            except RateLimitedError as exc:
                attempt += 1
                if attempt >= self.max_retries:
                    raise
                delay = exc.retry_after
                if delay is None:
                    delay = self.backoff_base * (2 ** (attempt - 1))
                logger.warning(
                    "rate limited, retry %d/%d in %.1fs",
                    attempt, self.max_retries, delay,
                )
                time.sleep(delay)

    def complete(self, request: CompletionRequest, policy: str = "replay") -> CompletionResponse:
        """Resolve one request under the given policy.

        Replay never touches the network; record persists the response
        under the request fingerprint before returning it.
        """
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}, expected one of {POLICIES}")
        fingerprint = fingerprint_request(request)
        if policy == "replay":
            if self.cache is None:
                raise CacheMissError(fingerprint)
            cached = self.cache.get(fingerprint)
            if cached is None:
                raise CacheMissError(fingerprint)
            return cached
        response = self._call_with_backoff(request)
        if policy == "record":
            if self.cache is None:
                raise ValueError("record policy requires a cache")
            self.cache.put(fingerprint, response)
        return response


def stitch_sql(
    cue: str, completion: str, stop_sequences: tuple[str, ...] = DEFAULT_STOP_SEQUENCES
) -> str:
    """Join the prompt's completion cue with the model's continuation.

    The continuation is truncated at the earliest stop sequence, glued
    to the cue, stripped of trailing whitespace, and terminated with a
    semicolon when the model did not produce one.
    """
    cut = len(completion)
    for stop in stop_sequences:
        idx = completion.find(stop)
        if idx != -1:
            cut = min(cut, idx)
    sql = (cue + completion[:cut]).rstrip()
    if not sql.endswith(";"):
        sql += ";"
    return sql
