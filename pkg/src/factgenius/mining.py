"""Two-stage validation of LLM-proposed relations against the graph.

Stage one checks each proposed relation string for an entity against that
entity's one-hop relation labels, keeping fuzzy matches whose similarity is
strictly above the threshold. Stage two pools every label validated anywhere
in stage one, by default augmented with each label's ``~`` counterpart, and
re-matches the pool against every entity's one-hop labels. Stage two only
ever adds relations, so its output is a per-entity superset of its input.

The reverse augmentation exists because one-hop sets store reverse directions
as ``~``-prefixed labels, and the bare marker alone costs too much similarity
for a cross-entity match to survive the default threshold (``mass`` vs
``~mass`` scores 80). It can be disabled with ``pool_reverse=False``.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping

from .fuzzy import best_matches
from .kg import KnowledgeGraph, reverse_label

__all__ = ["STAGE_ONE_ONLY", "TWO_STAGE", "stage_one", "stage_two", "mine"]

logger = logging.getLogger(__name__)

STAGE_ONE_ONLY = 1
TWO_STAGE = 2

# Entity -> proposed relation strings (free text, may not exist in the graph).
CandidateConnections = Mapping[str, Iterable[str]]
# Entity -> graph-validated relation labels, canonically ordered.
ValidatedConnections = dict[str, list[str]]


def _ranked(scores: dict[str, float]) -> list[str]:
    # Canonical order: descending score of first acceptance, then label.
    return [label for label, _ in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))]


def stage_one(
    g: KnowledgeGraph,
    candidates: CandidateConnections,
    threshold: float = 90.0,
) -> ValidatedConnections:
    """Validate each entity's proposed relations against its one-hop labels.

    Every entity key is retained, mapping to the (possibly empty) list of
    one-hop labels some proposal matched strictly above ``threshold``.
    """
    validated: ValidatedConnections = {}
    for entity, proposals in candidates.items():
        one_hop = g.one_hop_relations(entity)
        scores: dict[str, float] = {}
        for proposal in proposals:
            for label, score in best_matches(proposal, one_hop, threshold):
                scores.setdefault(label, score)
        validated[entity] = _ranked(scores)
    return validated


def stage_two(
    g: KnowledgeGraph,
    validated: ValidatedConnections,
    threshold: float = 90.0,
    pool_reverse: bool = True,
) -> ValidatedConnections:
    """Cross-entity enrichment: re-match the pooled validated labels (plus
    their reverses unless ``pool_reverse`` is off) against every entity.

    Entry-wise monotone: the result contains everything in ``validated``.
    """
    pool: set[str] = set()
    for labels in validated.values():
        pool.update(labels)
    if pool_reverse:
        pool.update(reverse_label(label) for label in list(pool))

    enriched: ValidatedConnections = {}
    for entity, labels in validated.items():
        one_hop = g.one_hop_relations(entity)
        # Labels already validated for this entity are exact graph members.
        scores: dict[str, float] = {label: 100.0 for label in labels}
        for pooled in sorted(pool):
            for label, score in best_matches(pooled, one_hop, threshold):
                scores.setdefault(label, score)
        enriched[entity] = _ranked(scores)
    return enriched


def mine(
    g: KnowledgeGraph,
    candidates: CandidateConnections,
    stage: int = TWO_STAGE,
    threshold: float = 90.0,
    pool_reverse: bool = True,
    iterate: bool = False,
) -> ValidatedConnections:
    """Run stage one, then stage two when ``stage`` is ``TWO_STAGE``.

    ``iterate=True`` repeats stage two until a fixpoint; the default single
    pass matches the standard procedure.
    """
    if stage not in (STAGE_ONE_ONLY, TWO_STAGE):
        raise ValueError(f"stage must be {STAGE_ONE_ONLY} or {TWO_STAGE}, got {stage!r}")
    validated = stage_one(g, candidates, threshold)
    if stage == STAGE_ONE_ONLY:
        return validated
    enriched = stage_two(g, validated, threshold, pool_reverse)
    if iterate:
        passes = 1
        while enriched != validated:
            validated, enriched = enriched, stage_two(g, enriched, threshold, pool_reverse)
            passes += 1
        logger.debug("stage two reached fixpoint after %d passes", passes)
    return enriched
