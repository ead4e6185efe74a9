"""Iterative prompt-tuning support: error binning, category registry, and the
prompt revision ledger.

Assignments are append-only with latest-wins reads so reviewer disagreement
stays auditable. Holdout discipline is enforced at write time and re-checked
by audit(): no triage record may ever reference a HOLDOUT advertiser, since
the holdout split exists to validate tuning, not to feed it.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable

from .corpus import Label
from .errors import AdSafetyError
from .evaluation import Split
from .gateway import BackendFailure
from .promptkit import ParseError, Verdict
from .store import RunStore, UnknownAdvertiser


class HoldoutViolation(AdSafetyError):
    code = "HoldoutViolation"


class UnknownCategory(AdSafetyError):
    code = "UnknownCategory"


class DuplicateCategory(AdSafetyError):
    code = "DuplicateCategory"


class RevisionGap(AdSafetyError):
    code = "RevisionGap"


@dataclass(frozen=True)
class ErrorCategory:
    category_id: str
    title: str
    description: str = ""
    created_in_revision: int = 1


#: Seeded defaults; the registry is open and reviewers add to it as categories
#: emerge during review.
DEFAULT_CATEGORIES = (
    ("missed-brand-context", "missed brand context"),
    ("policy-scope-confusion", "policy scope confusion"),
    ("profile-too-sparse", "profile too sparse"),
    ("output-format-failure", "output format failure"),
)


@dataclass
class TriageAssignment:
    run_id: str
    advertiser_id: str
    category_id: str
    reviewer_note: str = ""
    reviewer_label: Label | None = None
    timestamp: str = ""


@dataclass
class RevisionLedgerEntry:
    template_id: str
    from_revision: int
    to_revision: int
    addressed_category_ids: list[str]
    change_note: str = ""
    timestamp: str = ""


@dataclass
class ErrorCase:
    advertiser_id: str
    kind: str  # "fp" | "fn" | "unparsed"
    truth: Label | None
    decision: Label | None
    summary: str = ""
    rationale: str = ""
    parse_detail: str = ""
    current_category_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "advertiser_id": self.advertiser_id,
            "kind": self.kind,
            "truth": self.truth.value if self.truth else None,
            "decision": self.decision.value if self.decision else None,
            "summary": self.summary,
            "rationale": self.rationale,
            "parse_detail": self.parse_detail,
            "current_category_id": self.current_category_id,
        }


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _slugify(title: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")
    return slug or "category"


class TriageCenter:
    """Triage state persisted as append-only JSONL files under the run store."""

    def __init__(
        self,
        store: RunStore,
        split_lookup: Callable[[str], Split],
        seed_defaults: bool = True,
    ):
        self.store = store
        self.split_lookup = split_lookup
        self._dir = store.triage_dir()
        if seed_defaults and not (self._dir / "categories.jsonl").exists():
            for category_id, title in DEFAULT_CATEGORIES:
                self._append("categories.jsonl", {
                    "category_id": category_id,
                    "title": title,
                    "description": "",
                    "created_in_revision": 1,
                })

    def _append(self, name: str, record: dict) -> None:
        self.store._append_jsonl(self._dir / name, record)

    def _read(self, name: str) -> list[dict]:
        return self.store._read_jsonl(self._dir / name)

    # -- categories ------------------------------------------------------------

    def list_categories(self) -> list[ErrorCategory]:
        return [
            ErrorCategory(
                category_id=obj["category_id"],
                title=obj["title"],
                description=obj.get("description", ""),
                created_in_revision=obj.get("created_in_revision", 1),
            )
            for obj in self._read("categories.jsonl")
        ]

    def category_ids(self) -> set[str]:
        return {c.category_id for c in self.list_categories()}

    def add_category(
        self,
        title: str,
        description: str = "",
        created_in_revision: int = 1,
        category_id: str | None = None,
    ) -> ErrorCategory:
        if not title.strip():
            raise AdSafetyError("category title must be non-empty")
        category_id = category_id or _slugify(title)
        if category_id in self.category_ids():
            raise DuplicateCategory(f"category {category_id} already exists")
        record = {
            "category_id": category_id,
            "title": title,
            "description": description,
            "created_in_revision": created_in_revision,
        }
        self._append("categories.jsonl", record)
        return ErrorCategory(**record)

    # -- error listing -----------------------------------------------------------

    def list_errors(self, run_id: str, labels: dict[str, Label]) -> list[ErrorCase]:
        """All fp, fn, and unparsed cases for a run, advertiser_id ascending.

        fp/fn need a ground-truth label; unparsed cases are listed regardless.
        Backend failures are not triage cases (the run aborts on them).
        """
        outcomes = self.store.read_outcomes(run_id)
        current = self.current_assignments(run_id)
        cases: list[ErrorCase] = []
        for advertiser_id in sorted(outcomes):
            outcome = outcomes[advertiser_id]
            truth = labels.get(advertiser_id)
            assigned = current.get(advertiser_id)
            category = assigned.category_id if assigned else None
            if isinstance(outcome, ParseError):
                cases.append(
                    ErrorCase(
                        advertiser_id=advertiser_id,
                        kind="unparsed",
                        truth=truth,
                        decision=None,
                        parse_detail=f"{outcome.kind}: {outcome.detail}",
                        current_category_id=category,
                    )
                )
                continue
            if isinstance(outcome, BackendFailure) or truth is None:
                continue
            predicted_good = outcome.decision is Label.NON_VIOLATING
            truly_good = truth is Label.NON_VIOLATING
            if predicted_good == truly_good:
                continue
            cases.append(
                ErrorCase(
                    advertiser_id=advertiser_id,
                    kind="fp" if predicted_good else "fn",
                    truth=truth,
                    decision=outcome.decision,
                    summary=outcome.advertiser_summary,
                    rationale=outcome.rationale,
                    current_category_id=category,
                )
            )
        return cases

    # -- binning -------------------------------------------------------------------

    def bin_error(self, assignment: TriageAssignment) -> str:
        """Persist a bin. Re-binning the same (run, advertiser) replaces the
        prior assignment on read but keeps the history."""
        run = self.store.open_run(assignment.run_id)
        if assignment.advertiser_id not in run.candidates:
            raise UnknownAdvertiser(
                f"advertiser {assignment.advertiser_id} is not part of run {assignment.run_id}"
            )
        if assignment.category_id not in self.category_ids():
            raise UnknownCategory(f"no category {assignment.category_id}")
        if self.split_lookup(assignment.advertiser_id) is Split.HOLDOUT:
            raise HoldoutViolation(
                f"advertiser {assignment.advertiser_id} is in the HOLDOUT split; "
                "holdout errors must not influence prompt tuning"
            )
        seq = len(self._read("assignments.jsonl")) + 1
        assignment_id = f"{assignment.run_id[:12]}:{assignment.advertiser_id}:{seq}"
        self._append("assignments.jsonl", {
            "assignment_id": assignment_id,
            "run_id": assignment.run_id,
            "advertiser_id": assignment.advertiser_id,
            "category_id": assignment.category_id,
            "reviewer_note": assignment.reviewer_note,
            "reviewer_label": assignment.reviewer_label.value
            if assignment.reviewer_label
            else None,
            "timestamp": assignment.timestamp or _now_iso(),
        })
        return assignment_id

    def _assignment_from_dict(self, obj: dict) -> TriageAssignment:
        return TriageAssignment(
            run_id=obj["run_id"],
            advertiser_id=obj["advertiser_id"],
            category_id=obj["category_id"],
            reviewer_note=obj.get("reviewer_note", ""),
            reviewer_label=Label[obj["reviewer_label"]] if obj.get("reviewer_label") else None,
            timestamp=obj.get("timestamp", ""),
        )

    def assignment_history(self, run_id: str, advertiser_id: str) -> list[TriageAssignment]:
        return [
            self._assignment_from_dict(obj)
            for obj in self._read("assignments.jsonl")
            if obj["run_id"] == run_id and obj["advertiser_id"] == advertiser_id
        ]

    def current_assignments(self, run_id: str) -> dict[str, TriageAssignment]:
        """Latest-wins view of assignments for a run."""
        latest: dict[str, TriageAssignment] = {}
        for obj in self._read("assignments.jsonl"):
            if obj["run_id"] == run_id:
                latest[obj["advertiser_id"]] = self._assignment_from_dict(obj)
        return latest

    def category_histogram(self, run_id: str) -> dict[str, int]:
        self.store.open_run(run_id)
        counts = Counter(
            assignment.category_id
            for assignment in self.current_assignments(run_id).values()
        )
        return dict(counts)

    # -- revision ledger --------------------------------------------------------------

    def revision_ledger(self, template_id: str | None = None) -> list[RevisionLedgerEntry]:
        entries = [
            RevisionLedgerEntry(
                template_id=obj["template_id"],
                from_revision=obj["from_revision"],
                to_revision=obj["to_revision"],
                addressed_category_ids=list(obj["addressed_category_ids"]),
                change_note=obj.get("change_note", ""),
                timestamp=obj.get("timestamp", ""),
            )
            for obj in self._read("revisions.jsonl")
        ]
        if template_id is not None:
            entries = [e for e in entries if e.template_id == template_id]
        return entries

    def record_revision(self, entry: RevisionLedgerEntry) -> int:
        """Append to the gapless revision chain; returns the ledger position."""
        if entry.to_revision != entry.from_revision + 1:
            raise RevisionGap(
                f"revisions increase by exactly 1: got {entry.from_revision}->{entry.to_revision}"
            )
        if not entry.addressed_category_ids:
            raise AdSafetyError("a revision must address at least one category")
        known = self.category_ids()
        for category_id in entry.addressed_category_ids:
            if category_id not in known:
                raise UnknownCategory(f"no category {category_id}")
        chain = self.revision_ledger(entry.template_id)
        if chain and entry.from_revision != chain[-1].to_revision:
            raise RevisionGap(
                f"template {entry.template_id} is at revision {chain[-1].to_revision}, "
                f"cannot record {entry.from_revision}->{entry.to_revision}"
            )
        self._append("revisions.jsonl", {
            "template_id": entry.template_id,
            "from_revision": entry.from_revision,
            "to_revision": entry.to_revision,
            "addressed_category_ids": list(entry.addressed_category_ids),
            "change_note": entry.change_note,
            "timestamp": entry.timestamp or _now_iso(),
        })
        return len(self.revision_ledger()) - 1

    # -- audit --------------------------------------------------------------------------

    def audit(self) -> list[str]:
        """Re-verify holdout discipline over the whole assignment history.
        Returns violation descriptions; an empty list means the store is clean."""
        violations = []
        for obj in self._read("assignments.jsonl"):
            if self.split_lookup(obj["advertiser_id"]) is Split.HOLDOUT:
                violations.append(
                    f"assignment {obj.get('assignment_id', '?')} references HOLDOUT "
                    f"advertiser {obj['advertiser_id']}"
                )
        return violations


def promote_reviewer_labels(store: RunStore) -> dict[str, Label]:
    """Explicit promote step: reviewer-submitted labels (latest per advertiser)
    as an override map. Never applied implicitly, so metric comparability
    between runs is preserved until the operator opts in."""
    merged: dict[str, Label] = {}
    for record in store.read_reviewer_labels():
        merged[record["advertiser_id"]] = Label[record["label"]]
    return merged
