"""End-to-end claim verification.

Evidence mode runs two model conversations per claim: a filter conversation
proposing relations per entity (validated against the graph by the miner,
then materialized as evidence triples), and a verdict conversation over the
rendered evidence. Claim-only mode runs just the verdict conversation.

Every result carries a full trace (candidates, validated relations, evidence
lines, attempt counts, verdict) for audit. A claim whose verdict conversation
exhausts its retries is marked Refuted by default and flagged as failed, so
evaluation can report failures separately instead of silently counting them;
a claim whose *filter* conversation exhausts retries raises
:class:`ClaimVerificationError` carrying the partial trace, which batch
runners convert to the same flagged default.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .cache import ResponseCache, cache_key  # noqa: F401  (cache_key is pipeline API)
from .evidence import collect_evidence, render_evidence
from .gateway import ChatGateway, LlmConfig, RetryExhausted
from .kg import KnowledgeGraph
from .mining import TWO_STAGE, mine
from .parsing import REFUTED, Verdict, parse_connection_dict, parse_verdict
from .prompts import build_claim_only_prompt, build_evidence_prompt, build_filter_prompt

__all__ = [
    "MODE_CLAIM_ONLY",
    "MODE_EVIDENCE",
    "ClaimRecord",
    "PipelineConfig",
    "VerificationTrace",
    "ClaimVerificationError",
    "MissingLabelError",
    "EmptyEntitiesError",
    "Pipeline",
    "verify_claim",
    "export_training_data",
    "cache_key",
]

logger = logging.getLogger(__name__)

MODE_CLAIM_ONLY = "claim-only"
MODE_EVIDENCE = "evidence"


class MissingLabelError(ValueError):
    """A record lacks the gold label required by the operation."""


class EmptyEntitiesError(ValueError):
    """Evidence mode needs at least one entity per claim."""


@dataclass
class ClaimRecord:
    """One dataset row: claim text, its entities, and optional gold data."""

    id: str
    claim: str
    entities: list[str] = field(default_factory=list)
    label: str | None = None
    reasoning_types: list[str] = field(default_factory=list)


@dataclass
class PipelineConfig:
    """Everything that shapes a verification run."""

    llm: LlmConfig
    mode: str = MODE_EVIDENCE
    stage: int = TWO_STAGE
    threshold: float = 90.0
    per_relation_cap: int = 5
    options_cap: int | None = None
    pool_reverse: bool = True
    stage_two_iterate: bool = False
    cache_dir: str | Path | None = None

    def __post_init__(self) -> None:
        if self.mode not in (MODE_CLAIM_ONLY, MODE_EVIDENCE):
            raise ValueError(f"mode must be {MODE_CLAIM_ONLY!r} or {MODE_EVIDENCE!r}")
        if not 0.0 <= self.threshold <= 100.0:
            raise ValueError(f"threshold must be in [0, 100], got {self.threshold!r}")

    def as_dict(self) -> dict:
        snapshot = asdict(self)
        snapshot["cache_dir"] = str(self.cache_dir) if self.cache_dir else None
        return snapshot


@dataclass
class VerificationTrace:
    """Complete audit record for one claim."""

    claim_id: str
    claim: str
    entities: list[str]
    candidates: dict[str, list[str]]
    validated: dict[str, list[str]]
    evidence_lines: list[str]
    attempts_filter: int
    attempts_classify: int
    verdict: Verdict | None
    failed: bool = False

    def as_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "claim": self.claim,
            "entities": list(self.entities),
            "candidates": self.candidates,
            "validated": self.validated,
            "evidence_lines": list(self.evidence_lines),
            "attempts_filter": self.attempts_filter,
            "attempts_classify": self.attempts_classify,
            "verdict": self.verdict.as_dict() if self.verdict else None,
            "failed": self.failed,
        }


class ClaimVerificationError(Exception):
    """The filter conversation ran out of retries; ``trace`` holds the
    partial record accumulated before the failure."""

    def __init__(self, trace: VerificationTrace, cause: RetryExhausted):
        self.trace = trace
        self.cause = cause
        super().__init__(f"claim {trace.claim_id!r}: {cause}")


def _default_failure_verdict(exc: RetryExhausted, step: str) -> Verdict:
    raw = exc.raw_texts[-1] if exc.raw_texts else ""
    return Verdict(
        label=REFUTED,
        explanation=f"defaulted: {step} produced no usable response in {exc.attempts} attempts",
        raw_text=raw,
    )


class Pipeline:
    """Verification runner bound to one config, graph, and gateway.

    The graph is shared read-only; claims are independent, so :meth:`run`
    can fan out across a thread pool while preserving input order.
    """

    def __init__(
        self,
        cfg: PipelineConfig,
        graph: KnowledgeGraph,
        gateway: ChatGateway | None = None,
        transport=None,
    ):
        self.cfg = cfg
        self.graph = graph
        if gateway is None:
            cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir else None
            gateway = ChatGateway(cfg.llm, cache=cache, transport=transport)
            self._owns_gateway = True
        else:
            self._owns_gateway = False
        self.gateway = gateway

    def close(self) -> None:
        if self._owns_gateway:
            self.gateway.close()

    def __enter__(self) -> "Pipeline":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- single claim -------------------------------------------------------

    def verify_claim(self, record: ClaimRecord) -> VerificationTrace:
        """Run the configured pipeline on one claim and return its trace."""
        if self.cfg.mode == MODE_CLAIM_ONLY:
            return self._verify_claim_only(record)
        return self._verify_with_evidence(record)

    def _verify_claim_only(self, record: ClaimRecord) -> VerificationTrace:
        trace = VerificationTrace(
            claim_id=record.id,
            claim=record.claim,
            entities=list(record.entities),
            candidates={},
            validated={},
            evidence_lines=[],
            attempts_filter=0,
            attempts_classify=0,
            verdict=None,
        )
        messages = build_claim_only_prompt(record.claim)
        self._classify(trace, messages)
        return trace

    def _verify_with_evidence(self, record: ClaimRecord) -> VerificationTrace:
        if not record.entities:
            raise EmptyEntitiesError(f"claim {record.id!r} has no entities")
        trace = VerificationTrace(
            claim_id=record.id,
            claim=record.claim,
            entities=list(record.entities),
            candidates={},
            validated={},
            evidence_lines=[],
            attempts_filter=0,
            attempts_classify=0,
            verdict=None,
        )
        candidates = self._filter_connections(trace, record)
        trace.candidates = candidates
        trace.validated = mine(
            self.graph,
            candidates,
            stage=self.cfg.stage,
            threshold=self.cfg.threshold,
            pool_reverse=self.cfg.pool_reverse,
            iterate=self.cfg.stage_two_iterate,
        )
        triples = collect_evidence(self.graph, trace.validated, self.cfg.per_relation_cap)
        trace.evidence_lines = render_evidence(triples)
        messages = build_evidence_prompt(record.claim, trace.evidence_lines)
        self._classify(trace, messages)
        return trace

    def _filter_connections(self, trace: VerificationTrace, record: ClaimRecord) -> dict[str, list[str]]:
        options = {entity: self.graph.one_hop_relations(entity) for entity in record.entities}
        messages = build_filter_prompt(record.claim, options, self.cfg.options_cap)
        try:
            result = self.gateway.request_with_retry(
                messages, lambda text: parse_connection_dict(text, record.entities)
            )
        except RetryExhausted as exc:
            trace.attempts_filter = exc.attempts
            trace.failed = True
            raise ClaimVerificationError(trace, exc) from exc
        trace.attempts_filter = result.attempts
        return result.value

    def _classify(self, trace: VerificationTrace, messages) -> None:
        try:
            result = self.gateway.request_with_retry(messages, parse_verdict)
        except RetryExhausted as exc:
            trace.attempts_classify = exc.attempts
            trace.verdict = _default_failure_verdict(exc, "classification")
            trace.failed = True
            return
        trace.attempts_classify = result.attempts
        trace.verdict = result.value

    # -- batches ------------------------------------------------------------

    def run(self, records, workers: int = 1) -> list[VerificationTrace]:
        """Verify every record, preserving input order.

        Filter-stage failures are converted to the flagged Refuted default
        here, so one bad claim never aborts a batch.
        """

        def one(record: ClaimRecord) -> VerificationTrace:
            try:
                return self.verify_claim(record)
            except ClaimVerificationError as exc:
                logger.warning("claim %s failed: %s", record.id, exc.cause)
                trace = exc.trace
                trace.verdict = _default_failure_verdict(exc.cause, "connection filtering")
                return trace

        records = list(records)
        if workers <= 1:
            return [one(record) for record in records]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, records))

    def export_training_data(self, records, out: str | Path) -> int:
        """Write ``{"id", "claim", "evidence", "label"}`` JSONL for trainer
        consumption; evidence comes from the filter-and-mine path (empty in
        claim-only mode). Every record must carry a gold label."""
        records = list(records)
        for record in records:
            if record.label not in ("Supported", "Refuted"):
                raise MissingLabelError(f"record {record.id!r} has no gold label")
        out = Path(out)
        written = 0
        with out.open("w", encoding="utf-8") as handle:
            for record in records:
                if self.cfg.mode == MODE_CLAIM_ONLY:
                    evidence = ""
                else:
                    trace = VerificationTrace(
                        claim_id=record.id,
                        claim=record.claim,
                        entities=list(record.entities),
                        candidates={},
                        validated={},
                        evidence_lines=[],
                        attempts_filter=0,
                        attempts_classify=0,
                        verdict=None,
                    )
                    candidates = self._filter_connections(trace, record)
                    validated = mine(
                        self.graph,
                        candidates,
                        stage=self.cfg.stage,
                        threshold=self.cfg.threshold,
                        pool_reverse=self.cfg.pool_reverse,
                        iterate=self.cfg.stage_two_iterate,
                    )
                    lines = render_evidence(collect_evidence(self.graph, validated, self.cfg.per_relation_cap))
                    evidence = "\n".join(lines)
                row = {"id": record.id, "claim": record.claim, "evidence": evidence, "label": record.label}
                handle.write(json.dumps(row, ensure_ascii=False) + "\n")
                written += 1
        return written


def verify_claim(
    cfg: PipelineConfig,
    graph: KnowledgeGraph,
    record: ClaimRecord,
    gateway: ChatGateway | None = None,
) -> VerificationTrace:
    """Convenience wrapper for one-off verification."""
    with Pipeline(cfg, graph, gateway=gateway) as pipeline:
        return pipeline.verify_claim(record)


def export_training_data(
    cfg: PipelineConfig,
    graph: KnowledgeGraph,
    records,
    out: str | Path,
    gateway: ChatGateway | None = None,
) -> int:
    """Convenience wrapper around :meth:`Pipeline.export_training_data`."""
    with Pipeline(cfg, graph, gateway=gateway) as pipeline:
        return pipeline.export_training_data(records, out)


def write_traces(traces, path: str | Path) -> None:
    """One JSON object per claim, in run order."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for trace in traces:
            handle.write(json.dumps(trace.as_dict(), ensure_ascii=False) + "\n")
