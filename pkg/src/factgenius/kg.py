"""Loader and query surface for an undirected, DBpedia-style knowledge graph.

The graph is stored as directed labeled edges where each undirected link
appears twice: once under its forward label and once under the same label
prefixed with ``~`` (the reverse marker). Files that omit the reverse copies
are repaired during load, so the closure invariant always holds after
``load_kg`` returns: ``t in neighbors(e, r)`` iff ``e in neighbors(t, ~r)``.

File format (UTF-8 JSONL), one entity record per line::

    {"entity": "1097_Vicia", "links": {"mass": ["4.1"], "~discovered": ["..."]}}

Numeric literals such as ``4.1`` are ordinary entities. Tail lists are
deduplicated and kept in lexicographic order; duplicate (entity, relation,
tail) triples collapse to one edge.
"""

from __future__ import annotations

import json
import threading
from collections.abc import Iterable, Mapping
from pathlib import Path

__all__ = [
    "KgError",
    "MalformedFileError",
    "DuplicateEntityError",
    "EmptyGraphError",
    "reverse_label",
    "validate_relation_label",
    "KnowledgeGraph",
    "load_kg",
]


class KgError(ValueError):
    """Base class for graph loading and validation failures."""


class MalformedFileError(KgError):
    """A line could not be parsed or violates the record schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateEntityError(KgError):
    """Two records declare the same head entity."""


class EmptyGraphError(KgError):
    """The file contains no entity records."""


def validate_relation_label(name: str) -> str:
    """Check the ``~``-marking rules: at most one ``~`` and only as the first
    character, with a non-empty base name. Returns the label unchanged."""
    if not name:
        raise KgError("relation label is empty")
    base = name[1:] if name.startswith("~") else name
    if not base:
        raise KgError(f"relation label {name!r} has no base name")
    if "~" in base:
        raise KgError(f"relation label {name!r} contains an interior '~'")
    return name


def reverse_label(label: str) -> str:
    """Toggle the ``~`` prefix: ``mass`` <-> ``~mass``. An involution."""
    validate_relation_label(label)
    return label[1:] if label.startswith("~") else "~" + label


def _validate_entity(value: object, line: int | None = None) -> str:
    if not isinstance(value, str) or not value:
        raise MalformedFileError(f"entity id must be a non-empty string, got {value!r}", line)
    if value != value.strip():
        raise MalformedFileError(f"entity id {value!r} has surrounding whitespace", line)
    return value


class KnowledgeGraph:
    """Immutable adjacency over entities and ``~``-closed relation labels.

    Instances are built by :func:`load_kg` or :meth:`from_records` and are
    frozen afterwards: every query method is read-only, so a single graph can
    be shared freely across worker threads. Unknown entities are legal in all
    queries; they produce empty results and bump ``unknown_entity_queries``.
    """

    def __init__(self, adjacency: Mapping[str, Mapping[str, Iterable[str]]], closure_repairs: int = 0):
        adj: dict[str, dict[str, tuple[str, ...]]] = {}
        edge_count = 0
        for entity, links in adjacency.items():
            by_label: dict[str, tuple[str, ...]] = {}
            for label, tails in links.items():
                unique = tuple(sorted(set(tails)))
                if unique:
                    by_label[label] = unique
                    edge_count += len(unique)
            adj[entity] = by_label
        self._adjacency = adj
        self._one_hop = {entity: tuple(sorted(links)) for entity, links in adj.items()}
        self.entity_count = len(adj)
        self.edge_count = edge_count
        self.closure_repairs = closure_repairs
        self.unknown_entity_queries = 0
        self._diag_lock = threading.Lock()

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, Mapping[str, Iterable[str]]]]) -> "KnowledgeGraph":
        """Build a graph from (entity, links) pairs, synthesizing any missing
        reverse edges so the closure invariant holds."""
        adjacency: dict[str, dict[str, set[str]]] = {}
        seen_heads: set[str] = set()
        for entity, links in records:
            if entity in seen_heads:
                raise DuplicateEntityError(f"duplicate record for entity {entity!r}")
            seen_heads.add(entity)
            slot = adjacency.setdefault(entity, {})
            for label, tails in links.items():
                bucket = slot.setdefault(label, set())
                for tail in tails:
                    bucket.add(tail)
                    adjacency.setdefault(tail, {})
        if not seen_heads:
            raise EmptyGraphError("no entity records found")

        # Reverse closure: every (head, r, tail) needs (tail, ~r, head).
        repairs = 0
        pending = [
            (head, label, tail)
            for head, links in adjacency.items()
            for label, tails in links.items()
            for tail in tails
        ]
        for head, label, tail in pending:
            mirror = adjacency.setdefault(tail, {}).setdefault(reverse_label(label), set())
            if head not in mirror:
                mirror.add(head)
                repairs += 1
        return cls(adjacency, closure_repairs=repairs)

    def one_hop_relations(self, entity: str) -> list[str]:
        """All relation labels (forward and ``~``-marked) incident to
        ``entity``, lexicographically ordered. Empty for unknown entities."""
        found = self._one_hop.get(entity)
        if found is None:
            self._count_unknown(entity)
            return []
        return list(found)

    def neighbors(self, entity: str, relation: str) -> list[str]:
        """Tails of (entity, relation) in canonical order; empty if absent."""
        links = self._adjacency.get(entity)
        if links is None:
            self._count_unknown(entity)
            return []
        return list(links.get(relation, ()))

    def has_edge(self, head: str, relation: str, tail: str) -> bool:
        links = self._adjacency.get(head)
        return bool(links) and tail in links.get(relation, ())

    def entities(self) -> list[str]:
        return sorted(self._adjacency)

    def _count_unknown(self, entity: str) -> None:
        with self._diag_lock:
            self.unknown_entity_queries += 1

    def __contains__(self, entity: str) -> bool:
        return entity in self._adjacency

    def __repr__(self) -> str:
        return f"KnowledgeGraph(entities={self.entity_count}, edges={self.edge_count})"


def _parse_record(raw: str, line: int) -> tuple[str, dict[str, list[str]]]:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"invalid JSON ({exc.msg} at column {exc.colno})", line) from exc
    if not isinstance(obj, dict):
        raise MalformedFileError(f"expected an object, got {type(obj).__name__}", line)
    if "entity" not in obj:
        raise MalformedFileError("missing 'entity' field", line)
    entity = _validate_entity(obj["entity"], line)
    links_obj = obj.get("links", {})
    if not isinstance(links_obj, dict):
        raise MalformedFileError("'links' must be an object", line)
    links: dict[str, list[str]] = {}
    for label, tails in links_obj.items():
        try:
            validate_relation_label(label if isinstance(label, str) else "")
        except KgError as exc:
            raise MalformedFileError(str(exc), line) from exc
        if not isinstance(tails, list):
            raise MalformedFileError(f"tails of {label!r} must be an array", line)
        links[label] = [_validate_entity(tail, line) for tail in tails]
    return entity, links


def load_kg(path: str | Path) -> KnowledgeGraph:
    """Load a graph from a JSONL file, repairing missing reverse edges.

    Raises :class:`MalformedFileError` (with the offending line number),
    :class:`DuplicateEntityError`, or :class:`EmptyGraphError`.
    """
    path = Path(path)
    records: list[tuple[str, dict[str, list[str]]]] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            records.append(_parse_record(raw, line_no))
    return KnowledgeGraph.from_records(records)
