"""Fact verification over a knowledge graph.

A claim is checked in two model conversations: one filters plausible
relations for the claim's entities from their one-hop options, and one
renders a verdict over evidence triples. In between, the proposed relations
are validated against the graph with Levenshtein-based fuzzy matching in up
to two stages. Everything runs against any chat-completion endpoint,
including the bundled deterministic mock.
"""

from .cache import ResponseCache, cache_key
from .evidence import EvidenceTriple, collect_evidence, render_evidence
from .fuzzy import best_matches, levenshtein, similarity
from .gateway import (
    ChatGateway,
    LlmConfig,
    RawCompletion,
    RetryExhausted,
    RetryResult,
    complete,
    request_with_retry,
)
from .kg import KnowledgeGraph, load_kg, reverse_label
from .mining import STAGE_ONE_ONLY, TWO_STAGE, mine, stage_one, stage_two
from .parsing import REFUTED, SUPPORTED, Verdict, parse_connection_dict, parse_verdict
from .pipeline import (
    MODE_CLAIM_ONLY,
    MODE_EVIDENCE,
    ClaimRecord,
    Pipeline,
    PipelineConfig,
    VerificationTrace,
    export_training_data,
    verify_claim,
)
from .prompts import ChatMessage, build_claim_only_prompt, build_evidence_prompt, build_filter_prompt
from .evaluation import EvalReport, evaluate, load_dataset, render_report

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "KnowledgeGraph",
    "load_kg",
    "reverse_label",
    "levenshtein",
    "similarity",
    "best_matches",
    "STAGE_ONE_ONLY",
    "TWO_STAGE",
    "stage_one",
    "stage_two",
    "mine",
    "ChatMessage",
    "build_claim_only_prompt",
    "build_filter_prompt",
    "build_evidence_prompt",
    "LlmConfig",
    "ChatGateway",
    "RawCompletion",
    "RetryResult",
    "RetryExhausted",
    "complete",
    "request_with_retry",
    "SUPPORTED",
    "REFUTED",
    "Verdict",
    "parse_connection_dict",
    "parse_verdict",
    "EvidenceTriple",
    "collect_evidence",
    "render_evidence",
    "cache_key",
    "ResponseCache",
    "MODE_CLAIM_ONLY",
    "MODE_EVIDENCE",
    "ClaimRecord",
    "PipelineConfig",
    "Pipeline",
    "VerificationTrace",
    "verify_claim",
    "export_training_data",
    "EvalReport",
    "load_dataset",
    "evaluate",
    "render_report",
]
