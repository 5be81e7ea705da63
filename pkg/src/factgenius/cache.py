"""On-disk replay cache for chat completions.

Entries are keyed by a SHA-256 over (model name, temperature, serialized
messages), so any change to a prompt template, the model, or the sampling
temperature is automatically cache-busting. Each entry stores the response
text together with its own digest; an entry that fails the integrity check
is treated as a miss and rewritten. Writes go through a temp file and an
atomic rename, so concurrent workers can share one cache directory.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

__all__ = ["cache_key", "ResponseCache"]

logger = logging.getLogger(__name__)


def _message_dict(message) -> dict[str, str]:
    if hasattr(message, "as_dict"):
        return message.as_dict()
    return {"role": message["role"], "content": message["content"]}


def cache_key(model_name: str, temperature: float, messages) -> str:
    """Deterministic key over everything that influences the completion."""
    payload = {
        "model": model_name,
        "temperature": temperature,
        "messages": [_message_dict(m) for m in messages],
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class ResponseCache:
    """Write-once, read-many store of completion texts under a directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> str | None:
        """The cached text, or None on a miss or a corrupt entry."""
        path = self._path(key)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            text = entry["text"]
            if not isinstance(text, str) or entry.get("digest") != _digest(text):
                raise ValueError("integrity check failed")
        except FileNotFoundError:
            return None
        except (ValueError, KeyError, TypeError, OSError):
            logger.warning("corrupt cache entry %s; treating as a miss", path.name)
            return None
        return text

    def put(self, key: str, text: str) -> None:
        entry = json.dumps({"text": text, "digest": _digest(text)}, ensure_ascii=False)
        fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(entry)
            os.replace(tmp_name, self._path(key))
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise
