"""Prompt rendering and response parsing for advertiser classification.

Templates are plain text with ``{{PLACEHOLDER}}`` markers from a fixed
vocabulary. Rendering is byte-deterministic; when the character budget is
exceeded, profile items are dropped from the tail of the lowest-priority
bucket first. Model responses use a labeled-section contract
(SUMMARY/PRODUCTS/DECISION/RATIONALE) so that failures are binnable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import Label
from .errors import AdSafetyError
from .profiler import BUCKET_PRIORITY, BucketKind, ContentProfile, ProfileItem


class TemplateInvalid(AdSafetyError):
    code = "TemplateInvalid"


class BudgetImpossible(AdSafetyError):
    code = "BudgetImpossible"


class PolicyInvalid(AdSafetyError):
    code = "PolicyInvalid"


PLACEHOLDER_VOCABULARY = frozenset(
    {
        "POLICY_DESCRIPTION",
        "IN_SCOPE_EXAMPLES",
        "OUT_OF_SCOPE_EXAMPLES",
        "ADVERTISER_PROFILE",
        "TASK_INSTRUCTIONS",
        "OUTPUT_FORMAT",
    }
)

REQUIRED_PLACEHOLDERS = frozenset({"TASK_INSTRUCTIONS", "ADVERTISER_PROFILE"})

TASK_INSTRUCTIONS_TEXT = (
    "(1) Summarize the advertiser and their content.\n"
    "(2) Describe the advertiser's products and services.\n"
    "(3) Decide whether the advertiser violates the policy above."
)

OUTPUT_FORMAT_TEXT = (
    "Answer in exactly four labeled sections, one per line group:\n"
    "SUMMARY: <one-paragraph summary of the advertiser and their content>\n"
    "PRODUCTS: <the advertiser's products and services>\n"
    "DECISION: <VIOLATING or NON_VIOLATING>\n"
    "RATIONALE: <why you decided that>"
)

SECTION_NAMES = ("SUMMARY", "PRODUCTS", "DECISION", "RATIONALE")


@dataclass
class PolicySpec:
    policy_id: str
    name: str
    description: str
    in_scope_examples: list[str]
    out_of_scope_examples: list[str]

    def validate(self) -> None:
        if not self.policy_id:
            raise PolicyInvalid("policy_id must be non-empty")
        if not self.in_scope_examples:
            raise PolicyInvalid("in_scope_examples must be non-empty")
        if not self.out_of_scope_examples:
            raise PolicyInvalid("out_of_scope_examples must be non-empty")


def policy_from_dict(obj: dict) -> PolicySpec:
    try:
        policy = PolicySpec(
            policy_id=obj["policy_id"],
            name=obj.get("name", obj["policy_id"]),
            description=obj["description"],
            in_scope_examples=list(obj["in_scope_examples"]),
            out_of_scope_examples=list(obj["out_of_scope_examples"]),
        )
    except KeyError as exc:
        raise PolicyInvalid(f"policy file missing field {exc.args[0]}") from None
    policy.validate()
    return policy


def load_policy(path: str | Path) -> PolicySpec:
    import json

    with open(path, encoding="utf-8") as fh:
        return policy_from_dict(json.load(fh))


@dataclass(frozen=True)
class TemplateSection:
    kind: str  # "literal" | "placeholder"
    value: str


@dataclass
class PromptTemplate:
    template_id: str
    revision: int
    sections: list[TemplateSection]

    def validate(self) -> None:
        if self.revision < 1:
            raise TemplateInvalid(f"revision must be >= 1, got {self.revision}")
        seen: set[str] = set()
        for section in self.sections:
            if section.kind != "placeholder":
                continue
            if section.value not in PLACEHOLDER_VOCABULARY:
                raise TemplateInvalid(f"unknown placeholder {section.value}")
            if section.value in seen:
                raise TemplateInvalid(f"placeholder {section.value} appears twice")
            seen.add(section.value)
        missing = REQUIRED_PLACEHOLDERS - seen
        if missing:
            raise TemplateInvalid(f"template missing required placeholders: {sorted(missing)}")


_PLACEHOLDER_RE = re.compile(r"\{\{([A-Z_]+)\}\}")
_HEADER_RE = re.compile(r"^#\s*template:\s*(\S+)\s+r(\d+)\s*$")


def parse_template(body: str, template_id: str, revision: int) -> PromptTemplate:
    sections: list[TemplateSection] = []
    pos = 0
    for match in _PLACEHOLDER_RE.finditer(body):
        if match.start() > pos:
            sections.append(TemplateSection("literal", body[pos : match.start()]))
        sections.append(TemplateSection("placeholder", match.group(1)))
        pos = match.end()
    if pos < len(body):
        sections.append(TemplateSection("literal", body[pos:]))
    template = PromptTemplate(template_id=template_id, revision=revision, sections=sections)
    template.validate()
    return template


def load_template(path: str | Path) -> PromptTemplate:
    """Load a template file. The first line must be a header comment of the
    form ``# template: <template_id> r<revision>``; leading comment lines are
    stripped from the body."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise TemplateInvalid(f"{path}: empty template file")
    header = _HEADER_RE.match(lines[0])
    if not header:
        raise TemplateInvalid(
            f"{path}: first line must be '# template: <id> r<revision>'"
        )
    template_id, revision = header.group(1), int(header.group(2))
    body_start = 1
    while body_start < len(lines) and lines[body_start].startswith("#"):
        body_start += 1
    body = "\n".join(lines[body_start:])
    return parse_template(body, template_id, revision)


@dataclass
class PromptBudget:
    max_chars: int = 30000


@dataclass
class RenderedPrompt:
    text: str
    template_id: str
    revision: int
    advertiser_id: str
    char_budget_used: int
    truncated: bool


_BUCKET_HEADERS = {
    BucketKind.KNOWN_FALSE_POSITIVE: "Known false positives (flagged by the baseline classifier, human-confirmed compliant):",
    BucketKind.ALREADY_LABELED: "Previously labeled ads:",
    BucketKind.MOST_RELEVANT: "Most relevant ads (highest baseline violation scores):",
}


def _item_line(kind: BucketKind, item: ProfileItem) -> str:
    seen = f" (seen {item.occurrence_count}x)" if item.occurrence_count > 1 else ""
    if kind is BucketKind.KNOWN_FALSE_POSITIVE:
        return f"- {item.text}{seen}"
    if kind is BucketKind.ALREADY_LABELED:
        tag = item.label.value if item.label else "CONFLICTING_LABELS"
        return f"- [{tag}] {item.text}{seen}"
    return f"- (baseline {item.baseline_score:.2f}) {item.text}{seen}"


def _profile_block(profile: ContentProfile, kept: dict[BucketKind, int]) -> str:
    lines = [
        f"Advertiser: {profile.display_name or profile.advertiser_id} (id: {profile.advertiser_id})"
    ]
    if profile.knowledge_snippets:
        lines.append("Known facts about the advertiser:")
        lines.extend(f"- {snippet}" for snippet in profile.knowledge_snippets)
    if profile.targeting_terms:
        lines.append("Targeting terms: " + ", ".join(profile.targeting_terms))
    if profile.domains:
        lines.append("Destination domains: " + ", ".join(profile.domains))
    for kind in BUCKET_PRIORITY:
        items = profile.buckets[kind].items[: kept[kind]]
        if not items:
            continue
        lines.append(_BUCKET_HEADERS[kind])
        lines.extend(_item_line(kind, item) for item in items)
    return "\n".join(lines)


def _render_text(
    template: PromptTemplate,
    policy: PolicySpec,
    profile: ContentProfile,
    kept: dict[BucketKind, int],
) -> str:
    parts: list[str] = []
    for section in template.sections:
        if section.kind == "literal":
            parts.append(section.value)
            continue
        name = section.value
        if name == "POLICY_DESCRIPTION":
            parts.append(f"Policy: {policy.name} (id: {policy.policy_id})\n{policy.description}")
        elif name == "IN_SCOPE_EXAMPLES":
            parts.append("\n".join(f"- {ex}" for ex in policy.in_scope_examples))
        elif name == "OUT_OF_SCOPE_EXAMPLES":
            parts.append("\n".join(f"- {ex}" for ex in policy.out_of_scope_examples))
        elif name == "ADVERTISER_PROFILE":
            parts.append(_profile_block(profile, kept))
        elif name == "TASK_INSTRUCTIONS":
            parts.append(TASK_INSTRUCTIONS_TEXT)
        elif name == "OUTPUT_FORMAT":
            parts.append(OUTPUT_FORMAT_TEXT)
    return "".join(parts)


def render_prompt(
    template: PromptTemplate,
    policy: PolicySpec,
    profile: ContentProfile,
    budget: PromptBudget | None = None,
) -> RenderedPrompt:
    """Render deterministically, dropping profile items from the tail of the
    lowest-priority bucket until the text fits the character budget."""
    template.validate()
    policy.validate()
    budget = budget or PromptBudget()

    kept = {kind: len(profile.buckets[kind].items) for kind in BUCKET_PRIORITY}
    text = _render_text(template, policy, profile, kept)
    truncated = False
    while len(text) > budget.max_chars:
        dropped = False
        # Drop from lowest-priority bucket first.
        for kind in reversed(BUCKET_PRIORITY):
            if kept[kind] > 0:
                kept[kind] -= 1
                dropped = True
                break
        if not dropped:
            raise BudgetImpossible(
                f"fixed prompt sections need {len(text)} chars, budget is {budget.max_chars}"
            )
        truncated = True
        text = _render_text(template, policy, profile, kept)

    return RenderedPrompt(
        text=text,
        template_id=template.template_id,
        revision=template.revision,
        advertiser_id=profile.advertiser_id,
        char_budget_used=len(text),
        truncated=truncated,
    )


@dataclass
class Verdict:
    advertiser_id: str
    decision: Label
    advertiser_summary: str
    products_services: str
    rationale: str
    raw_response: str
    template_revision: int


@dataclass
class ParseError:
    """A response that did not meet the output contract. Data, not an
    exception: parse failures are triage input, carried with the raw text."""

    kind: str  # "missing_section" | "ambiguous_decision" | "empty_response"
    detail: str
    raw: str
    advertiser_id: str = ""
    template_revision: int = 0


_SECTION_HEADER_RE = re.compile(
    r"^\s*(summary|products|decision|rationale)\s*:\s*(.*)$", re.IGNORECASE
)


def _normalize_decision(value: str) -> Label | None:
    token = re.sub(r"[^A-Z]+", "_", value.upper()).strip("_")
    if token == "VIOLATING":
        return Label.VIOLATING
    if token == "NON_VIOLATING":
        return Label.NON_VIOLATING
    return None


def parse_response(
    raw: str, advertiser_id: str = "", template_revision: int = 0
) -> Verdict | ParseError:
    """Total parser: every input maps to a Verdict or exactly one ParseError."""
    if not raw or not raw.strip():
        return ParseError(
            kind="empty_response",
            detail="response is empty",
            raw=raw,
            advertiser_id=advertiser_id,
            template_revision=template_revision,
        )

    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in raw.splitlines():
        match = _SECTION_HEADER_RE.match(line)
        if match:
            current = match.group(1).upper()
            sections.setdefault(current, [])
            if match.group(2):
                sections[current].append(match.group(2))
        elif current is not None:
            sections[current].append(line)

    for name in SECTION_NAMES:
        content = "\n".join(sections.get(name, [])).strip()
        if not content:
            return ParseError(
                kind="missing_section",
                detail=f"missing or empty section {name}",
                raw=raw,
                advertiser_id=advertiser_id,
                template_revision=template_revision,
            )

    decision = _normalize_decision("\n".join(sections["DECISION"]).strip())
    if decision is None:
        return ParseError(
            kind="ambiguous_decision",
            detail=f"cannot normalize decision {' '.join(sections['DECISION']).strip()!r}",
            raw=raw,
            advertiser_id=advertiser_id,
            template_revision=template_revision,
        )

    return Verdict(
        advertiser_id=advertiser_id,
        decision=decision,
        advertiser_summary="\n".join(sections["SUMMARY"]).strip(),
        products_services="\n".join(sections["PRODUCTS"]).strip(),
        rationale="\n".join(sections["RATIONALE"]).strip(),
        raw_response=raw,
        template_revision=template_revision,
    )


def verdict_to_dict(verdict: Verdict) -> dict:
    return {
        "advertiser_id": verdict.advertiser_id,
        "decision": verdict.decision.value,
        "advertiser_summary": verdict.advertiser_summary,
        "products_services": verdict.products_services,
        "rationale": verdict.rationale,
        "raw_response": verdict.raw_response,
        "template_revision": verdict.template_revision,
    }


def verdict_from_dict(obj: dict) -> Verdict:
    return Verdict(
        advertiser_id=obj["advertiser_id"],
        decision=Label[obj["decision"]],
        advertiser_summary=obj["advertiser_summary"],
        products_services=obj["products_services"],
        rationale=obj["rationale"],
        raw_response=obj["raw_response"],
        template_revision=obj["template_revision"],
    )


def parse_error_to_dict(err: ParseError) -> dict:
    return {
        "kind": err.kind,
        "detail": err.detail,
        "raw": err.raw,
        "advertiser_id": err.advertiser_id,
        "template_revision": err.template_revision,
    }


def parse_error_from_dict(obj: dict) -> ParseError:
    return ParseError(
        kind=obj["kind"],
        detail=obj["detail"],
        raw=obj["raw"],
        advertiser_id=obj.get("advertiser_id", ""),
        template_revision=obj.get("template_revision", 0),
    )
