"""Levenshtein edit distance and the 0-100 similarity score used by relation mining.

Matching is case-sensitive, whitespace-preserving, and works on Unicode code
points. Relation labels are identifiers, so a leading ``~`` (reverse marker)
is a real one-character difference: ``similarity("mass", "~mass") == 80``.
"""

from __future__ import annotations

from collections.abc import Iterable

__all__ = ["levenshtein", "similarity", "best_matches"]


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character insertions, deletions, and
    substitutions needed to turn ``a`` into ``b``.

    Runs in O(len(a) * len(b)) time and O(min(len(a), len(b))) space.
    """
    if a == b:
        return 0
    # Keep b as the shorter string so the rolling rows stay small.
    if len(b) > len(a):
        a, b = b, a
    if not b:
        return len(a)

    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current[j] = min(
                previous[j] + 1,        # deletion
                current[j - 1] + 1,     # insertion
                previous[j - 1] + cost, # substitution
            )
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    """Normalized similarity in [0, 100]: ``100 * (1 - d / max(|a|, |b|))``.

    Two empty strings are defined to be 100 (they are equal). The score is
    100 exactly when the strings are equal, since any edit costs at least
    ``100 / max(|a|, |b|)`` points.
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 100.0
    return 100.0 * (1.0 - levenshtein(a, b) / longest)


def best_matches(
    query: str,
    candidates: Iterable[str],
    threshold: float = 90.0,
) -> list[tuple[str, float]]:
    """All candidates whose similarity to ``query`` is strictly above
    ``threshold``, sorted by descending score, ties broken lexicographically.

    Duplicate candidates are considered once. The comparison is strict
    (``score > threshold``), so a threshold of 90 rejects a score of
    exactly 90.
    """
    if not 0.0 <= threshold <= 100.0:
        raise ValueError(f"threshold must be in [0, 100], got {threshold!r}")
    seen: set[str] = set()
    scored: list[tuple[str, float]] = []
    for candidate in candidates:
        if candidate in seen:
            continue
        seen.add(candidate)
        score = similarity(query, candidate)
        if score > threshold:
            scored.append((candidate, score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored
