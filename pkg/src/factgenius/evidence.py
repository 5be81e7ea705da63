"""Materialize validated relations into concrete graph triples and render
them as the evidence lines fed to the verdict prompt.

Reverse relations are normalized to the forward direction: a validated
``(e, ~r)`` with neighbor ``t`` becomes the triple ``(t, r, e)``, so every
rendered line reads left to right along the stored forward edge, e.g.
``1097_Vicia >- mass -> ""4.1""``. Tails that look like literal values are
wrapped in doubled quotes exactly as shown.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .kg import KnowledgeGraph

__all__ = ["EvidenceTriple", "collect_evidence", "render_evidence"]

_IDENTIFIER = re.compile(r"[A-Za-z0-9_()',.\-]+")
_NUMBER = re.compile(r"-?\d+(\.\d+)?([eE][+-]?\d+)?")


@dataclass(frozen=True, order=True)
class EvidenceTriple:
    """A forward graph edge selected as evidence; ``relation`` never carries
    the ``~`` marker."""

    head: str
    relation: str
    tail: str


def collect_evidence(
    g: KnowledgeGraph,
    validated: Mapping[str, Iterable[str]],
    per_relation_cap: int = 5,
) -> list[EvidenceTriple]:
    """Expand each (entity, relation) pair into up to ``per_relation_cap``
    triples, normalized to the forward direction, deduplicated, and in
    canonical (head, relation, tail) order."""
    if per_relation_cap < 1:
        raise ValueError(f"per_relation_cap must be positive, got {per_relation_cap!r}")
    triples: set[EvidenceTriple] = set()
    for entity, relations in validated.items():
        for relation in relations:
            tails = g.neighbors(entity, relation)[:per_relation_cap]
            if relation.startswith("~"):
                forward = relation[1:]
                triples.update(EvidenceTriple(tail, forward, entity) for tail in tails)
            else:
                triples.update(EvidenceTriple(entity, relation, tail) for tail in tails)
    return sorted(triples)


def _is_literal_value(tail: str) -> bool:
    # Anything outside the identifier alphabet, or number-shaped, is a value.
    return _IDENTIFIER.fullmatch(tail) is None or _NUMBER.fullmatch(tail) is not None


def render_line(triple: EvidenceTriple) -> str:
    tail = f'""{triple.tail}""' if _is_literal_value(triple.tail) else triple.tail
    return f"{triple.head} >- {triple.relation} -> {tail}"


def render_evidence(triples: Iterable[EvidenceTriple]) -> list[str]:
    """One ``head >- relation -> tail`` line per triple, in input order."""
    return [render_line(triple) for triple in triples]
