"""Chat prompt builders for the three conversations the pipeline runs.

The templates are frozen verbatim (golden tests pin every byte): a claim-only
verdict prompt, a connection-filtering prompt that lists each entity's
one-hop relation options, and a verdict prompt carrying rendered evidence
lines. Builders are pure, so identical inputs produce byte-identical
messages; the response cache keys on those bytes.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

__all__ = [
    "ChatMessage",
    "EmptyClaimError",
    "EmptyOptionsError",
    "build_claim_only_prompt",
    "build_filter_prompt",
    "build_evidence_prompt",
    "OPTIONS_MARKER",
    "NO_EVIDENCE_PLACEHOLDER",
]


class EmptyClaimError(ValueError):
    """The claim text is empty."""


class EmptyOptionsError(ValueError):
    """The filter prompt needs at least one entity with its options."""


@dataclass(frozen=True)
class ChatMessage:
    """One chat turn; only the two roles the templates use are valid."""

    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user"):
            raise ValueError(f"unsupported role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")

    def as_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


OPTIONS_MARKER = "# options (strictly choose from):"
NO_EVIDENCE_PLACEHOLDER = "(no evidence found)"

_CLAIM_ONLY_SYSTEM = (
    "You are an intelligent fact checker trained on Wikipedia. You are given a single claim "
    "and your task is to decide whether all the facts in the given claim are supported by the "
    "given evidence using your knowledge.\n"
    "Choose one of {True, False}, and output the one-sentence explanation for the choice."
)

_ANSWER_TEMPLATE = '#Answer Template:\n"True/False (single word answer),\nOne-sentence evidence."'

_CLAIM_ONLY_USER = (
    "## TASK:\n"
    "Now let’s verify the Claim based on the evidence.\n"
    "Claim:\n"
    "{claim}\n"
    "\n" + _ANSWER_TEMPLATE
)

_FILTER_SYSTEM = (
    "You are an intelligent graph connection finder. You are given a single claim and "
    "connection options for the entities present in the claim. Your task is to filter the "
    "Connections options that could be relevant to connect given entities to fact-check "
    "Claim1. ~ ( tilde ) in the beginning means the reverse connection."
)

_FILTER_USER = (
    "Claim1:\n"
    "{claim}\n"
    "\n"
    "## TASK:\n"
    "- For each of the given entities given in the DICT structure below:\n"
    "    Filter the connections strictly from the given options that would be relevant to "
    "connect given entities to fact-check Claim1.\n"
    "- Think clever, there could be multi-step hidden connections, if not direct, that could "
    "connect the entities somehow.\n"
    "- Prioritize connections among entities and arrange them based on their relevance. "
    "Be extra careful with ~ signs.\n"
    "- No code output. No explanation. Output only valid python DICT of structure:\n"
    "\n"
    "{{\n"
    "{options_block}\n"
    "}}"
)

_EVIDENCE_SYSTEM = (
    "You are an intelligent fact-checker. You are given a single claim and supporting "
    "evidence for the entities present in the claim, extracted from a knowledge graph.\n"
    "Your task is to decide whether all the facts in the given claim are supported by the "
    "given evidence.\n"
    "Choose one of {True, False}, and output the one-sentence explanation for the choice."
)

_EVIDENCE_USER = (
    "## TASK:\n"
    "Now let’s verify the Claim based on the evidence.\n"
    "Claim:\n"
    "{claim}\n"
    "\n"
    "Evidences:\n"
    "{evidence_block}\n"
    "\n" + _ANSWER_TEMPLATE
)


def _require_claim(claim: str) -> str:
    if not claim or not claim.strip():
        raise EmptyClaimError("claim text must be non-empty")
    return claim


def build_claim_only_prompt(claim: str) -> list[ChatMessage]:
    """Verdict prompt with no evidence: the model must rely on what it knows."""
    _require_claim(claim)
    return [
        ChatMessage("system", _CLAIM_ONLY_SYSTEM),
        ChatMessage("user", _CLAIM_ONLY_USER.format(claim=claim)),
    ]


def build_filter_prompt(
    claim: str,
    options: Mapping[str, Iterable[str]],
    options_cap: int | None = None,
) -> list[ChatMessage]:
    """Connection-filtering prompt listing each entity with its one-hop
    relation options, entities in lexicographic order.

    ``options_cap`` truncates each entity's option list to the first *cap*
    labels (canonical order) and appends an ellipsis marker; by default every
    label is emitted.
    """
    _require_claim(claim)
    if not options:
        raise EmptyOptionsError("at least one entity with options is required")
    if options_cap is not None and options_cap < 1:
        raise ValueError(f"options_cap must be positive, got {options_cap!r}")

    sections: list[str] = []
    for entity in sorted(options):
        labels = list(options[entity])
        if options_cap is not None and len(labels) > options_cap:
            rendered = ", ".join(labels[:options_cap]) + ", ..."
        else:
            rendered = ", ".join(labels)
        options_line = f"{OPTIONS_MARKER} {rendered}" if rendered else OPTIONS_MARKER
        sections.append(f'"{entity}": ["...", "...", ... ],\n{options_line}')
    block = "\n\n".join(sections)
    return [
        ChatMessage("system", _FILTER_SYSTEM),
        ChatMessage("user", _FILTER_USER.format(claim=claim, options_block=block)),
    ]


def build_evidence_prompt(claim: str, evidence_lines: Iterable[str]) -> list[ChatMessage]:
    """Verdict prompt carrying the rendered evidence block, one triple per
    line; an empty list yields an explicit placeholder block."""
    _require_claim(claim)
    lines = list(evidence_lines)
    block = "\n".join(lines) if lines else NO_EVIDENCE_PLACEHOLDER
    return [
        ChatMessage("system", _EVIDENCE_SYSTEM),
        ChatMessage("user", _EVIDENCE_USER.format(claim=claim, evidence_block=block)),
    ]
