"""Deterministic stand-in for a chat-completion server.

A :class:`MockScript` answers from the prompt content alone, so the whole
test suite runs with no model: the oracle behavior extracts the claim and
entity list from the prompt with lightweight patterns (pinned to the prompt
golden files by tests) and answers from a gold table; other behaviors echo
options, return fixed text, fail a scripted number of times, or simulate
server errors. A script can be used in-process through :func:`as_transport`
or served over HTTP with :func:`serve`, speaking the same wire protocol the
gateway sends.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .gateway import ServerError, Transport

__all__ = [
    "MockStatus",
    "MockScript",
    "as_transport",
    "MockServer",
    "serve",
    "script_from_spec",
    "is_filter_prompt",
    "extract_claim",
    "extract_entity_options",
    "extract_entities",
    "GIBBERISH",
]

logger = logging.getLogger(__name__)

GIBBERISH = "~~ mock gibberish: not a dict, not a verdict ~~"

# Extraction patterns, pinned to the prompt templates by golden tests.
_FILTER_PREFIX = "Claim1:\n"
_FILTER_CLAIM_END = "\n\n## TASK:"
_CLASSIFY_CLAIM_START = "\nClaim:\n"
_ENTITY_OPTIONS = re.compile(r'(?m)^"(.+)": \[.*\],\n# options \(strictly choose from\):(?: (.*))?$')


class MockStatus(Exception):
    """Raised by a script to make the server answer with an HTTP status."""

    def __init__(self, status: int):
        self.status = status
        super().__init__(f"scripted status {status}")


def _user_content(messages: list[dict]) -> str:
    for message in reversed(messages):
        if message.get("role") == "user":
            return message.get("content", "")
    return ""


def is_filter_prompt(user_content: str) -> bool:
    return user_content.startswith(_FILTER_PREFIX)


def extract_claim(user_content: str) -> str:
    """The claim embedded in either prompt shape."""
    if is_filter_prompt(user_content):
        end = user_content.find(_FILTER_CLAIM_END)
        return user_content[len(_FILTER_PREFIX):end if end != -1 else None]
    start = user_content.find(_CLASSIFY_CLAIM_START)
    if start == -1:
        return ""
    start += len(_CLASSIFY_CLAIM_START)
    end = user_content.find("\n\n", start)
    return user_content[start:end if end != -1 else None]


def extract_entity_options(user_content: str) -> dict[str, list[str]]:
    """Entity -> listed options from a filter prompt's option lines."""
    found: dict[str, list[str]] = {}
    for entity, raw in _ENTITY_OPTIONS.findall(user_content):
        options = [item for item in (part.strip() for part in raw.split(",")) if item and item != "..."]
        found[entity] = options
    return found


def extract_entities(user_content: str) -> list[str]:
    """The entities listed in a filter prompt, in prompt order."""
    return [entity for entity, _ in _ENTITY_OPTIONS.findall(user_content)]


class MockScript:
    """One scripted behavior plus an append-only call log.

    The log records (messages, response) pairs in call order; tests use its
    length to assert exact request counts.
    """

    def __init__(self, behavior):
        self._behavior = behavior
        self._lock = threading.Lock()
        self._calls = 0
        self.call_log: list[tuple[list[dict], str]] = []

    # -- constructors for the supported behaviors -------------------------

    @classmethod
    def fixed(cls, text: str) -> "MockScript":
        return cls(lambda index, messages: text)

    @classmethod
    def echo_all_options(cls) -> "MockScript":
        def behavior(index: int, messages: list[dict]) -> str:
            user = _user_content(messages)
            if is_filter_prompt(user):
                return json.dumps(extract_entity_options(user))
            return "True, echoing in the absence of an opinion."

        return cls(behavior)

    @classmethod
    def fail_n_then(cls, n: int, text: str) -> "MockScript":
        def behavior(index: int, messages: list[dict]) -> str:
            return GIBBERISH if index <= n else text

        return cls(behavior)

    @classmethod
    def status_error(cls, status: int) -> "MockScript":
        def behavior(index: int, messages: list[dict]) -> str:
            raise MockStatus(status)

        return cls(behavior)

    @classmethod
    def oracle(cls, gold_table: dict, invert: bool = False) -> "MockScript":
        """Answer filter prompts with each entity's gold connections and
        verdict prompts with the gold label in answer-template form.

        ``gold_table`` maps claim text to ``{"label": ..., "connections":
        {entity: [relations]}}``. An unknown claim raises KeyError, which the
        HTTP layer reports as status 500 (a loud signal of a bad fixture).
        ``invert`` flips every gold label, for worst-case evaluation tests.
        """

        def behavior(index: int, messages: list[dict]) -> str:
            user = _user_content(messages)
            claim = extract_claim(user)
            entry = gold_table[claim]
            if is_filter_prompt(user):
                connections = entry.get("connections", {})
                answer = {
                    entity: list(connections.get(entity, []))
                    for entity in extract_entity_options(user)
                }
                return json.dumps(answer)
            supported = entry["label"] == "Supported"
            if invert:
                supported = not supported
            word = "True" if supported else "False"
            return f"{word}, The gold table says so."

        return cls(behavior)

    # -- invocation --------------------------------------------------------

    def respond(self, messages: list[dict]) -> str:
        """In-process call path; raises :class:`MockStatus` for scripted
        HTTP failures."""
        with self._lock:
            self._calls += 1
            index = self._calls
        try:
            text = self._behavior(index, messages)
        except MockStatus as exc:
            with self._lock:
                self.call_log.append((messages, f"<status {exc.status}>"))
            raise
        with self._lock:
            self.call_log.append((messages, text))
        return text


def as_transport(script: MockScript) -> Transport:
    """Adapt a script to the gateway's transport interface, mapping scripted
    statuses to :class:`ServerError` just as the HTTP path would."""

    def transport(payload: dict) -> str:
        try:
            return script.respond(payload["messages"])
        except MockStatus as exc:
            raise ServerError(exc.status, "scripted failure") from exc

    return transport


class _Handler(BaseHTTPRequestHandler):
    script: MockScript  # injected by serve()

    def do_POST(self) -> None:  # noqa: N802 (http.server API)
        length = int(self.headers.get("Content-Length") or 0)
        try:
            payload = json.loads(self.rfile.read(length))
            text = self.script.respond(payload.get("messages", []))
        except MockStatus as exc:
            self.send_response(exc.status)
            self.end_headers()
            return
        except Exception as exc:  # fixture bugs must be loud, not hangs
            logger.error("mock server failed to respond: %s", exc)
            self.send_response(500)
            self.end_headers()
            return
        body = json.dumps({"choices": [{"message": {"role": "assistant", "content": text}}]})
        encoded = body.encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(encoded)))
        self.end_headers()
        self.wfile.write(encoded)

    def log_message(self, *args) -> None:  # keep test output clean
        pass


class MockServer:
    """Running HTTP server around a script; use as a context manager."""

    def __init__(self, script: MockScript, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (_Handler,), {"script": script})
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self.script = script
        self.host = host
        self.port = self._httpd.server_address[1]
        self.url = f"http://{host}:{self.port}/chat/completions"
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def wait(self) -> None:
        """Block until the server thread exits (i.e. until close())."""
        self._thread.join()

    def __enter__(self) -> "MockServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def serve(script: MockScript, host: str = "127.0.0.1", port: int = 0) -> MockServer:
    """Start a server for ``script`` on ``port`` (0 picks a free one)."""
    return MockServer(script, host=host, port=port)


def script_from_spec(spec: str) -> MockScript:
    """Build a script from a CLI spec string.

    Forms: ``echo``, ``fixed:<text>``, ``fail:<n>:<text>``,
    ``status:<code>``, ``oracle:<gold.json>``, ``oracle-invert:<gold.json>``.
    """
    kind, _, rest = spec.partition(":")
    if kind == "echo":
        return MockScript.echo_all_options()
    if kind == "fixed":
        return MockScript.fixed(rest)
    if kind == "fail":
        count, _, text = rest.partition(":")
        return MockScript.fail_n_then(int(count), text)
    if kind == "status":
        return MockScript.status_error(int(rest))
    if kind in ("oracle", "oracle-invert"):
        with open(rest, "r", encoding="utf-8") as handle:
            table = json.load(handle)
        return MockScript.oracle(table, invert=(kind == "oracle-invert"))
    raise ValueError(f"unknown mock script spec {spec!r}")
