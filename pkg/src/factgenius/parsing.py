"""Parsers for the two model output shapes: the per-entity connection dict
and the True/False verdict line.

Model output is messy in practice: code fences, surrounding prose, single
quotes, trailing commas, ``#`` comments, placeholder ellipses. Both parsers
therefore never raise anything but a typed :class:`ParseRejection` on
arbitrary input; the gateway turns a rejection into a retry.
"""

from __future__ import annotations

import ast
import json
import logging
import re
from collections.abc import Iterable
from dataclasses import dataclass

__all__ = [
    "SUPPORTED",
    "REFUTED",
    "Verdict",
    "ParseRejection",
    "NoDictFound",
    "UnbalancedBraces",
    "NoVerdictToken",
    "parse_connection_dict",
    "parse_verdict",
]

logger = logging.getLogger(__name__)

SUPPORTED = "Supported"
REFUTED = "Refuted"


class ParseRejection(ValueError):
    """A model response that cannot be parsed; the request should be retried."""


class NoDictFound(ParseRejection):
    """No balanced brace literal anywhere in the response."""


class UnbalancedBraces(ParseRejection):
    """An opening brace is never closed."""


class NoVerdictToken(ParseRejection):
    """No standalone true/false token in the response."""


@dataclass(frozen=True)
class Verdict:
    """Binary decision with the model's one-sentence explanation.

    ``raw_text`` preserves the full response for audit.
    """

    label: str
    explanation: str
    raw_text: str

    def as_answer_line(self) -> str:
        """Re-serialize in the answer-template shape the parser accepts."""
        word = "True" if self.label == SUPPORTED else "False"
        return f"{word}, {self.explanation}" if self.explanation else word

    def as_dict(self) -> dict[str, str]:
        return {"label": self.label, "explanation": self.explanation, "raw_text": self.raw_text}


def _scan_block(text: str, start: int) -> int | None:
    """Return the index one past the brace block opening at ``start``, or
    None if it never balances. Quotes and ``#`` comments are honored so that
    braces inside strings or comments do not count."""
    depth = 0
    i = start
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in "\"'":
            quote = ch
            i += 1
            while i < n:
                if text[i] == "\\":
                    i += 2
                    continue
                if text[i] == quote:
                    break
                i += 1
            if i >= n:
                return None  # unterminated string swallows the rest
            i += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return None


def _strip_comments(block: str) -> str:
    """Drop ``#``-to-end-of-line comments outside of quoted strings."""
    out: list[str] = []
    i = 0
    n = len(block)
    while i < n:
        ch = block[i]
        if ch in "\"'":
            quote = ch
            out.append(ch)
            i += 1
            while i < n:
                out.append(block[i])
                if block[i] == "\\" and i + 1 < n:
                    out.append(block[i + 1])
                    i += 2
                    continue
                if block[i] == quote:
                    i += 1
                    break
                i += 1
            continue
        if ch == "#":
            while i < n and block[i] != "\n":
                i += 1
            continue
        out.append(ch)
        i += 1
    return "".join(out)


_JSON_WORDS = {"true": "True", "false": "False", "null": "None"}


def _literal_dict(block: str) -> dict | None:
    """Best-effort evaluation of a brace block as a dict literal."""
    attempts = [block]
    stripped = _strip_comments(block)
    # JSON spellings of the constant words, fixed outside of strings.
    attempts.append(re.sub(r"\b(true|false|null)\b", lambda m: _JSON_WORDS[m.group(1)], stripped))
    for candidate in attempts:
        try:
            value = ast.literal_eval(candidate)
        except (ValueError, TypeError, SyntaxError, MemoryError, RecursionError):
            continue
        if isinstance(value, dict):
            return value
    try:
        value = json.loads(stripped)
    except (json.JSONDecodeError, RecursionError):
        return None
    return value if isinstance(value, dict) else None


def _coerce_key(key: object) -> str | None:
    if isinstance(key, str):
        return key.strip()
    if isinstance(key, (int, float)):
        return str(key)  # unquoted numeric keys, e.g. {4.1: [...]}
    return None


def _coerce_values(value: object) -> list[str] | None:
    if isinstance(value, str):
        return [value.strip()]
    if isinstance(value, (list, tuple, set)):
        return [item.strip() for item in value if isinstance(item, str)]
    return None


def parse_connection_dict(text: str, claim_entities: Iterable[str]) -> dict[str, list[str]]:
    """Extract the per-entity connection dict from a model response.

    The first balanced brace block that evaluates to a dict wins; prose, code
    fences, comments, trailing commas, and either quote style are tolerated.
    Keys outside ``claim_entities`` are dropped (with a warning), non-string
    values are skipped, duplicates collapse keeping first occurrence, and
    every claim entity appears in the result, defaulting to an empty list.
    Candidate strings are not checked against the graph here; that is the
    miner's job.
    """
    entities = list(dict.fromkeys(claim_entities))
    parsed: dict | None = None
    saw_unbalanced = False
    pos = 0
    while True:
        start = text.find("{", pos)
        if start == -1:
            break
        end = _scan_block(text, start)
        if end is None:
            # Unterminated from here; a later brace may still open a clean
            # block (the failed scan may have misread an apostrophe).
            saw_unbalanced = True
            pos = start + 1
            continue
        candidate = _literal_dict(text[start:end])
        if candidate is not None:
            parsed = candidate
            break
        pos = start + 1

    if parsed is None:
        if saw_unbalanced:
            raise UnbalancedBraces("an opening brace is never closed")
        raise NoDictFound("no balanced dict literal in response")

    known = set(entities)
    result: dict[str, list[str]] = {entity: [] for entity in entities}
    dropped = 0
    for raw_key, raw_value in parsed.items():
        key = _coerce_key(raw_key)
        values = _coerce_values(raw_value)
        if key is None or key not in known:
            dropped += 1
            continue
        if values is None:
            continue
        merged = result[key] + [v for v in values if v]
        result[key] = list(dict.fromkeys(merged))
    if dropped:
        logger.warning("dropped %d connection-dict key(s) not in the claim's entity set", dropped)
    return result


_VERDICT_TOKEN = re.compile(r"\b(true|false)\b", re.IGNORECASE)
_SEPARATORS = re.compile(r"^[\s,.:;!?\-–—*)\]]+")


def parse_verdict(text: str) -> Verdict:
    """Find the first standalone ``true``/``false`` token (case-insensitive,
    punctuation-delimited) and treat the remaining text as the explanation.

    The answer template puts the verdict first, so a later "True or False"
    inside the explanation cannot flip an already-found verdict.
    """
    match = _VERDICT_TOKEN.search(text)
    if match is None:
        raise NoVerdictToken("no standalone true/false token in response")
    label = SUPPORTED if match.group(1).lower() == "true" else REFUTED
    remainder = _SEPARATORS.sub("", text[match.end():]).strip()
    return Verdict(label=label, explanation=remainder, raw_text=text)
