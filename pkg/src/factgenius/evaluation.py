"""Dataset loading and accuracy reporting.

Datasets are JSONL rows of ``{"id", "claim", "entities", "label", "types"}``
with the binary gold label and one or more reasoning-type tags. Source
exports spell the tags differently (``num1``, ``multi claim``, ...), so the
loader maps them through an alias table onto the five canonical names and
rejects anything unknown.

A claim carrying several tags counts toward each of its types, so per-type
counts can sum to more than the total; the overall accuracy counts each
claim once.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

from .kg import KnowledgeGraph
from .parsing import REFUTED, SUPPORTED
from .pipeline import ClaimRecord, Pipeline, PipelineConfig, VerificationTrace

__all__ = [
    "CANONICAL_TYPES",
    "DEFAULT_TYPE_ALIASES",
    "SchemaError",
    "UnknownTypeTag",
    "ClaimOutcome",
    "EvalReport",
    "load_dataset",
    "evaluate",
    "aggregate",
    "render_report",
]

logger = logging.getLogger(__name__)

CANONICAL_TYPES = ("one-hop", "conjunction", "existence", "multi-hop", "negation")

DEFAULT_TYPE_ALIASES: dict[str, str] = {
    "one-hop": "one-hop",
    "one hop": "one-hop",
    "onehop": "one-hop",
    "num1": "one-hop",
    "conjunction": "conjunction",
    "multi claim": "conjunction",
    "multiclaim": "conjunction",
    "multi-claim": "conjunction",
    "existence": "existence",
    "multi-hop": "multi-hop",
    "multi hop": "multi-hop",
    "multihop": "multi-hop",
    "negation": "negation",
}

_LABELS = (SUPPORTED, REFUTED)


class SchemaError(ValueError):
    """A dataset row violates the expected schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownTypeTag(SchemaError):
    """A reasoning-type tag has no alias onto the canonical five."""


def _normalize_types(raw: object, aliases: Mapping[str, str], line: int) -> list[str]:
    if not isinstance(raw, list):
        raise SchemaError(f"'types' must be an array, got {type(raw).__name__}", line)
    mapped: list[str] = []
    for tag in raw:
        if not isinstance(tag, str):
            raise SchemaError(f"type tag must be a string, got {tag!r}", line)
        canonical = aliases.get(tag.strip().lower())
        if canonical is None:
            raise UnknownTypeTag(f"unknown reasoning-type tag {tag!r}", line)
        if canonical not in mapped:
            mapped.append(canonical)
    return mapped


def _parse_row(raw: str, line: int, aliases: Mapping[str, str]) -> ClaimRecord:
    try:
        row = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc.msg})", line) from exc
    if not isinstance(row, dict):
        raise SchemaError("row must be an object", line)
    for key in ("id", "claim", "entities", "label", "types"):
        if key not in row:
            raise SchemaError(f"missing {key!r} field", line)
    claim_id = row["id"]
    if isinstance(claim_id, int):
        claim_id = str(claim_id)
    if not isinstance(claim_id, str) or not claim_id:
        raise SchemaError(f"'id' must be a non-empty string, got {row['id']!r}", line)
    claim = row["claim"]
    if not isinstance(claim, str) or not claim.strip():
        raise SchemaError("'claim' must be non-empty text", line)
    entities = row["entities"]
    if (
        not isinstance(entities, list)
        or not entities
        or not all(isinstance(e, str) and e for e in entities)
    ):
        raise SchemaError("'entities' must be a non-empty array of entity ids", line)
    label = row["label"]
    if label not in _LABELS:
        raise SchemaError(f"'label' must be one of {_LABELS}, got {label!r}", line)
    types = _normalize_types(row["types"], aliases, line)
    return ClaimRecord(
        id=claim_id,
        claim=claim,
        entities=list(dict.fromkeys(entities)),
        label=label,
        reasoning_types=types,
    )


def load_dataset(path: str | Path, aliases: Mapping[str, str] | None = None) -> list[ClaimRecord]:
    """Load and validate a dataset file, preserving row order."""
    aliases = DEFAULT_TYPE_ALIASES if aliases is None else aliases
    records: list[ClaimRecord] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            records.append(_parse_row(raw, line_no, aliases))
    return records


@dataclass(frozen=True)
class ClaimOutcome:
    """Per-claim evaluation row (the CSV export)."""

    id: str
    gold: str
    predicted: str
    types: tuple[str, ...]
    failed: bool

    @property
    def correct(self) -> bool:
        return self.gold == self.predicted


@dataclass
class EvalReport:
    """Accuracy breakdown over one run."""

    total: int
    correct: int
    accuracy: float
    per_type: dict[str, dict[str, float]]
    confusion: dict[str, dict[str, int]]
    failed: int
    claims: list[ClaimOutcome] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "per_type": self.per_type,
            "confusion": self.confusion,
            "failed": self.failed,
            "claims": [
                {
                    "id": c.id,
                    "gold": c.gold,
                    "predicted": c.predicted,
                    "types": list(c.types),
                    "failed": c.failed,
                }
                for c in self.claims
            ],
        }


def aggregate(records: list[ClaimRecord], traces: list[VerificationTrace]) -> EvalReport:
    """Fold per-claim traces into the report; pure given the results."""
    if len(records) != len(traces):
        raise ValueError("records and traces must align one-to-one")
    outcomes: list[ClaimOutcome] = []
    confusion = {gold: {pred: 0 for pred in _LABELS} for gold in _LABELS}
    type_counts: dict[str, list[int]] = {}
    correct = 0
    failed = 0
    for record, trace in zip(records, traces):
        if record.label not in _LABELS:
            raise ValueError(f"record {record.id!r} has no gold label")
        predicted = trace.verdict.label if trace.verdict else REFUTED
        outcome = ClaimOutcome(
            id=record.id,
            gold=record.label,
            predicted=predicted,
            types=tuple(record.reasoning_types),
            failed=trace.failed,
        )
        outcomes.append(outcome)
        confusion[outcome.gold][outcome.predicted] += 1
        correct += outcome.correct
        failed += trace.failed
        for tag in record.reasoning_types:
            bucket = type_counts.setdefault(tag, [0, 0])
            bucket[0] += 1
            bucket[1] += outcome.correct
    total = len(outcomes)
    per_type = {
        tag: {
            "count": count,
            "correct": right,
            "accuracy": right / count if count else 0.0,
        }
        for tag, (count, right) in type_counts.items()
    }
    ordered = {tag: per_type[tag] for tag in CANONICAL_TYPES if tag in per_type}
    ordered.update({tag: stats for tag, stats in per_type.items() if tag not in ordered})
    return EvalReport(
        total=total,
        correct=correct,
        accuracy=correct / total if total else 0.0,
        per_type=ordered,
        confusion=confusion,
        failed=failed,
        claims=outcomes,
    )


def evaluate(
    cfg: PipelineConfig,
    graph: KnowledgeGraph,
    records: list[ClaimRecord],
    gateway=None,
    transport=None,
    workers: int = 1,
) -> EvalReport:
    """Verify every record and aggregate the outcome.

    Individual claim failures never abort the run; they count as flagged
    Refuted defaults and show up in ``failed``.
    """
    with Pipeline(cfg, graph, gateway=gateway, transport=transport) as pipeline:
        traces = pipeline.run(records, workers=workers)
    return aggregate(records, traces)


def _text_table(report: EvalReport) -> str:
    rows = [("type", "count", "correct", "accuracy")]
    for tag, stats in report.per_type.items():
        rows.append((tag, str(stats["count"]), str(stats["correct"]), f"{stats['accuracy']:.3f}"))
    rows.append(("TOTAL", str(report.total), str(report.correct), f"{report.accuracy:.3f}"))
    widths = [max(len(row[col]) for row in rows) for col in range(4)]
    lines = [
        "  ".join(cell.ljust(widths[col]) if col == 0 else cell.rjust(widths[col]) for col, cell in enumerate(row))
        for row in rows
    ]
    lines.append(f"failed: {report.failed}")
    lines.append("")
    lines.append("confusion (gold x predicted):")
    header = " " * 12 + "".join(label.rjust(12) for label in _LABELS)
    lines.append(header)
    for gold in _LABELS:
        cells = "".join(str(report.confusion[gold][pred]).rjust(12) for pred in _LABELS)
        lines.append(gold.ljust(12) + cells)
    return "\n".join(lines) + "\n"


def render_report(report: EvalReport, fmt: str = "text") -> bytes:
    """Serialize a report as ``text`` (results table), ``json`` (the full
    structure), or ``csv`` (one row per claim)."""
    if fmt == "json":
        return (json.dumps(report.as_dict(), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["id", "gold", "predicted", "types", "failed"])
        for claim in report.claims:
            writer.writerow([claim.id, claim.gold, claim.predicted, "|".join(claim.types), str(claim.failed).lower()])
        return buffer.getvalue().encode("utf-8")
    if fmt == "text":
        return _text_table(report).encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")
