"""Chat-completion client with the retry protocol.

Speaks the de-facto open-source inference wire protocol: HTTP POST of
``{"model", "temperature", "messages"}``, response JSON carrying
``choices[0].message.content``. Any server implementing that shape works,
including the bundled mock. A gateway can also be given an in-process
``transport`` callable instead of an endpoint, which the test suite and the
throughput checks use to skip the network entirely.

Retries are immediate, with the identical prompt, up to ``max_attempts``
(default 10). A request is retried on transport failures, non-success HTTP
statuses, and parse rejections; a malformed response envelope from an
otherwise healthy server is raised as :class:`ProtocolError` instead.
"""

from __future__ import annotations

import logging
import threading
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import httpx

from .cache import ResponseCache, cache_key
from .parsing import ParseRejection
from .prompts import ChatMessage

__all__ = [
    "LlmConfig",
    "RawCompletion",
    "RetryResult",
    "GatewayError",
    "TransportError",
    "ProtocolError",
    "ServerError",
    "RetryExhausted",
    "ChatGateway",
    "complete",
    "request_with_retry",
]

logger = logging.getLogger(__name__)

Transport = Callable[[dict], str]


class GatewayError(Exception):
    """Base class for completion failures."""


class TransportError(GatewayError):
    """The endpoint could not be reached or timed out."""


class ProtocolError(GatewayError):
    """The response envelope does not carry an assistant message."""


class ServerError(GatewayError):
    """The server answered with a non-success status."""

    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"server returned status {status}" + (f": {detail}" if detail else ""))


class RetryExhausted(GatewayError):
    """Every attempt failed; carries the raw texts for diagnostics."""

    def __init__(self, attempts: int, last_reason: str, raw_texts: list[str]):
        self.attempts = attempts
        self.last_reason = last_reason
        self.raw_texts = raw_texts
        super().__init__(f"no usable response after {attempts} attempt(s): {last_reason}")


@dataclass
class LlmConfig:
    """Endpoint and request policy for one model."""

    endpoint_url: str
    model_name: str
    temperature: float = 0.0
    max_attempts: int = 10
    request_timeout: float = 60.0
    max_parallel_requests: int = 8

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.max_parallel_requests < 1:
            raise ValueError("max_parallel_requests must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class RawCompletion:
    """Assistant text plus bookkeeping for one completion call."""

    text: str
    attempt_index: int
    latency: float
    from_cache: bool = False


@dataclass(frozen=True)
class RetryResult:
    """Parsed value plus how many attempts it took."""

    value: object
    attempts: int
    raw_texts: list[str] = field(default_factory=list)


class ChatGateway:
    """Reusable client: shared connection pool, a parallelism limiter, and an
    optional response cache.

    Thread-safe; concurrent ``complete`` calls are bounded by
    ``max_parallel_requests``. Retries of a single request run sequentially.
    """

    def __init__(
        self,
        cfg: LlmConfig,
        cache: ResponseCache | None = None,
        transport: Transport | None = None,
    ):
        self.cfg = cfg
        self.cache = cache
        self._transport = transport
        self._limiter = threading.Semaphore(cfg.max_parallel_requests)
        self._client: httpx.Client | None = None
        self._client_lock = threading.Lock()

    def _http_client(self) -> httpx.Client:
        with self._client_lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.cfg.request_timeout)
            return self._client

    def close(self) -> None:
        with self._client_lock:
            if self._client is not None:
                self._client.close()
                self._client = None

    def __enter__(self) -> "ChatGateway":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _send(self, payload: dict) -> str:
        if self._transport is not None:
            return self._transport(payload)
        try:
            response = self._http_client().post(self.cfg.endpoint_url, json=payload)
        except httpx.HTTPError as exc:
            raise TransportError(f"request to {self.cfg.endpoint_url} failed: {exc}") from exc
        if response.status_code >= 400:
            raise ServerError(response.status_code, response.text[:200])
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"response envelope malformed: {exc}") from exc
        if not isinstance(text, str):
            raise ProtocolError("assistant content is not a string")
        return text

    def complete(
        self,
        messages: Sequence[ChatMessage],
        read_cache: bool = True,
        attempt_index: int = 1,
    ) -> RawCompletion:
        """One chat-completion request; replays from the cache when possible.

        ``read_cache=False`` forces a live call (used by retries, which must
        not replay the response that just failed to parse); a live result
        still overwrites the cache entry.
        """
        payload = {
            "model": self.cfg.model_name,
            "temperature": self.cfg.temperature,
            "messages": [m.as_dict() for m in messages],
        }
        key = None
        if self.cache is not None:
            key = cache_key(self.cfg.model_name, self.cfg.temperature, messages)
            if read_cache:
                cached = self.cache.get(key)
                if cached is not None:
                    return RawCompletion(cached, attempt_index, 0.0, from_cache=True)
        started = time.perf_counter()
        with self._limiter:
            text = self._send(payload)
        latency = time.perf_counter() - started
        if self.cache is not None and key is not None:
            self.cache.put(key, text)
        return RawCompletion(text, attempt_index, latency)

    def request_with_retry(
        self,
        messages: Sequence[ChatMessage],
        parse: Callable[[str], object],
    ) -> RetryResult:
        """Call ``complete`` then ``parse``, retrying on transport errors,
        server errors, and parse rejections.

        Returns the first successfully parsed value with its attempt count;
        raises :class:`RetryExhausted` carrying every raw text seen.
        """
        raw_texts: list[str] = []
        last_reason = "no attempts made"
        for attempt in range(1, self.cfg.max_attempts + 1):
            try:
                completion = self.complete(messages, read_cache=(attempt == 1), attempt_index=attempt)
            except (TransportError, ServerError) as exc:
                last_reason = str(exc)
                logger.debug("attempt %d failed: %s", attempt, exc)
                continue
            raw_texts.append(completion.text)
            try:
                value = parse(completion.text)
            except ParseRejection as exc:
                last_reason = f"{type(exc).__name__}: {exc}"
                logger.debug("attempt %d rejected by parser: %s", attempt, exc)
                continue
            return RetryResult(value=value, attempts=attempt, raw_texts=raw_texts)
        raise RetryExhausted(self.cfg.max_attempts, last_reason, raw_texts)


def complete(cfg: LlmConfig, messages: Sequence[ChatMessage]) -> RawCompletion:
    """One-shot completion without a shared gateway."""
    with ChatGateway(cfg) as gateway:
        return gateway.complete(messages)


def request_with_retry(
    cfg: LlmConfig,
    messages: Sequence[ChatMessage],
    parse: Callable[[str], object],
) -> RetryResult:
    """One-shot retrying request without a shared gateway."""
    with ChatGateway(cfg) as gateway:
        return gateway.request_with_retry(messages, parse)
