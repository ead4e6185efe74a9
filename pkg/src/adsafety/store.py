"""Append-only run store with content-addressed run ids.

On-disk layout (all inspectable, no database):

    <root>/runs/<run_id>/meta.json      run metadata, rewritten atomically
    <root>/runs/<run_id>/outcomes.log   length-prefixed JSON outcome records
    <root>/runs/<run_id>/outcomes.idx   advertiser_id -> byte offset (advisory)
    <root>/runs/<run_id>/template.txt   snapshot of the prompt template used
    <root>/triage/*.jsonl               triage registries (see triage module)
    <root>/reviewer_labels.jsonl        labels submitted through the service
    <root>/hint_views.jsonl             hint-exposure log

Each outcomes.log record is an 8-byte big-endian unsigned length followed by
that many bytes of UTF-8 JSON: {"advertiser_id": ..., "outcome": {...}}.
Appends are flushed and fsynced per record, and the log is the source of
truth: the index is rebuilt by scanning, and a torn trailing record (crash
mid-write) is ignored. run_id is the SHA-256 of the canonical JSON of
{backend_kind, candidates, policy_id, template_id, template_revision}
(sorted keys, "," / ":" separators), so identical inputs give identical ids
on any machine.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .errors import AdSafetyError
from .gateway import BackendFailure
from .promptkit import (
    ParseError,
    Verdict,
    parse_error_from_dict,
    parse_error_to_dict,
    verdict_from_dict,
    verdict_to_dict,
)

Outcome = Verdict | ParseError | BackendFailure


class UnknownRun(AdSafetyError):
    code = "UnknownRun"


class UnknownAdvertiser(AdSafetyError):
    code = "UnknownAdvertiser"


class DuplicateConflict(AdSafetyError):
    code = "DuplicateConflict"


class RunNotRunning(AdSafetyError):
    code = "RunNotRunning"


class IncompleteRun(AdSafetyError):
    code = "IncompleteRun"

    def __init__(self, run_id: str, missing: list[str]):
        super().__init__(
            f"run {run_id} missing outcomes for: {', '.join(missing)}"
        )
        self.missing = missing


class RunStatus(str, Enum):
    RUNNING = "RUNNING"
    COMPLETE = "COMPLETE"
    FAILED = "FAILED"


@dataclass
class RunRecord:
    run_id: str
    template_id: str
    template_revision: int
    policy_id: str
    backend_kind: str
    candidates: list[str]
    status: RunStatus
    started_at: str
    finished_at: str | None = None
    failure_reason: str | None = None
    # Split restriction the run was launched with; informational, not part of
    # the content address (the candidate list already reflects it).
    split: str | None = None

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "template_id": self.template_id,
            "template_revision": self.template_revision,
            "policy_id": self.policy_id,
            "backend_kind": self.backend_kind,
            "candidates": list(self.candidates),
            "status": self.status.value,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "failure_reason": self.failure_reason,
            "split": self.split,
        }

    @staticmethod
    def from_dict(obj: dict) -> "RunRecord":
        return RunRecord(
            run_id=obj["run_id"],
            template_id=obj["template_id"],
            template_revision=obj["template_revision"],
            policy_id=obj["policy_id"],
            backend_kind=obj["backend_kind"],
            candidates=list(obj["candidates"]),
            status=RunStatus(obj["status"]),
            started_at=obj["started_at"],
            finished_at=obj.get("finished_at"),
            failure_reason=obj.get("failure_reason"),
            split=obj.get("split"),
        )


def compute_run_id(
    *,
    template_id: str,
    template_revision: int,
    policy_id: str,
    candidates: list[str],
    backend_kind: str,
) -> str:
    canonical = json.dumps(
        {
            "backend_kind": backend_kind,
            "candidates": list(candidates),
            "policy_id": policy_id,
            "template_id": template_id,
            "template_revision": template_revision,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def outcome_to_dict(outcome: Outcome) -> dict:
    if isinstance(outcome, Verdict):
        return {"kind": "verdict", "payload": verdict_to_dict(outcome)}
    if isinstance(outcome, ParseError):
        return {"kind": "parse_error", "payload": parse_error_to_dict(outcome)}
    if isinstance(outcome, BackendFailure):
        return {
            "kind": "backend_error",
            "payload": {
                "code": outcome.code,
                "message": outcome.message,
                "advertiser_id": outcome.advertiser_id,
            },
        }
    raise TypeError(f"unsupported outcome type {type(outcome)!r}")


def outcome_from_dict(obj: dict) -> Outcome:
    kind = obj.get("kind")
    payload = obj.get("payload", {})
    if kind == "verdict":
        return verdict_from_dict(payload)
    if kind == "parse_error":
        return parse_error_from_dict(payload)
    if kind == "backend_error":
        return BackendFailure(
            code=payload["code"],
            message=payload["message"],
            advertiser_id=payload.get("advertiser_id", ""),
        )
    raise AdSafetyError(f"unknown outcome kind {kind!r}")


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


_LEN = struct.Struct(">Q")


class RunStore:
    """One writer per run, many concurrent readers. Readers always rescan the
    log, so they see a consistent snapshot at a record boundary."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "runs").mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    # -- paths ---------------------------------------------------------------

    def _run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def _meta_path(self, run_id: str) -> Path:
        return self._run_dir(run_id) / "meta.json"

    def _log_path(self, run_id: str) -> Path:
        return self._run_dir(run_id) / "outcomes.log"

    def _idx_path(self, run_id: str) -> Path:
        return self._run_dir(run_id) / "outcomes.idx"

    def triage_dir(self) -> Path:
        path = self.root / "triage"
        path.mkdir(parents=True, exist_ok=True)
        return path

    # -- run lifecycle ---------------------------------------------------------

    def create_run(
        self,
        *,
        template_id: str,
        template_revision: int,
        policy_id: str,
        candidates: list[str],
        backend_kind: str,
        template_text: str | None = None,
        split: str | None = None,
    ) -> RunRecord:
        """Create the run if absent, otherwise return the existing record
        (resume semantics: the content-addressed id makes re-creation a lookup)."""
        run_id = compute_run_id(
            template_id=template_id,
            template_revision=template_revision,
            policy_id=policy_id,
            candidates=candidates,
            backend_kind=backend_kind,
        )
        if self._meta_path(run_id).exists():
            return self.open_run(run_id)
        record = RunRecord(
            run_id=run_id,
            template_id=template_id,
            template_revision=template_revision,
            policy_id=policy_id,
            backend_kind=backend_kind,
            candidates=list(candidates),
            status=RunStatus.RUNNING,
            started_at=_now_iso(),
            split=split,
        )
        self._run_dir(run_id).mkdir(parents=True, exist_ok=True)
        self._log_path(run_id).touch()
        if template_text is not None:
            (self._run_dir(run_id) / "template.txt").write_text(
                template_text, encoding="utf-8"
            )
        self._write_meta(record)
        return record

    def run_exists(self, run_id: str) -> bool:
        return self._meta_path(run_id).exists()

    def open_run(self, run_id: str) -> RunRecord:
        meta = self._meta_path(run_id)
        if not meta.exists():
            raise UnknownRun(f"no run {run_id}")
        return RunRecord.from_dict(json.loads(meta.read_text(encoding="utf-8")))

    def list_runs(self) -> list[RunRecord]:
        runs_dir = self.root / "runs"
        records = []
        for entry in sorted(runs_dir.iterdir()) if runs_dir.exists() else []:
            if (entry / "meta.json").exists():
                records.append(self.open_run(entry.name))
        records.sort(key=lambda r: (r.started_at, r.run_id))
        return records

    def resume_run(self, run_id: str) -> RunRecord:
        """Put a RUNNING or FAILED run back into RUNNING for more writes."""
        record = self.open_run(run_id)
        if record.status is RunStatus.COMPLETE:
            return record
        record.status = RunStatus.RUNNING
        record.finished_at = None
        record.failure_reason = None
        self._write_meta(record)
        return record

    def finalize_run(self, run_id: str) -> RunRecord:
        record = self.open_run(run_id)
        if record.status is RunStatus.COMPLETE:
            return record
        recorded = self.recorded_advertisers(run_id)
        missing = [a for a in record.candidates if a not in recorded]
        if missing:
            raise IncompleteRun(run_id, missing)
        record.status = RunStatus.COMPLETE
        record.finished_at = _now_iso()
        record.failure_reason = None
        self._write_meta(record)
        return record

    def mark_failed(self, run_id: str, reason: str = "") -> RunRecord:
        record = self.open_run(run_id)
        if record.status is RunStatus.COMPLETE:
            return record
        record.status = RunStatus.FAILED
        record.finished_at = _now_iso()
        record.failure_reason = reason or None
        self._write_meta(record)
        return record

    def _write_meta(self, record: RunRecord) -> None:
        path = self._meta_path(record.run_id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(record.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
        os.replace(tmp, path)

    # -- outcomes --------------------------------------------------------------

    def _scan_log(self, run_id: str) -> dict[str, dict]:
        """advertiser_id -> outcome dict, ignoring a torn trailing record."""
        path = self._log_path(run_id)
        outcomes: dict[str, dict] = {}
        if not path.exists():
            return outcomes
        data = path.read_bytes()
        pos = 0
        while pos + _LEN.size <= len(data):
            (length,) = _LEN.unpack_from(data, pos)
            start = pos + _LEN.size
            if start + length > len(data):
                break  # torn tail from a crash mid-write
            try:
                obj = json.loads(data[start : start + length].decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                break
            outcomes[obj["advertiser_id"]] = obj["outcome"]
            pos = start + length
        return outcomes

    def record_verdict(self, run_id: str, advertiser_id: str, outcome: Outcome) -> None:
        """Exactly-once per (run, advertiser): an identical duplicate write is a
        no-op, a conflicting one is an error."""
        with self._write_lock:
            record = self.open_run(run_id)
            if advertiser_id not in record.candidates:
                raise UnknownAdvertiser(
                    f"advertiser {advertiser_id} is not a candidate of run {run_id}"
                )
            payload = outcome_to_dict(outcome)
            existing = self._scan_log(run_id)
            if advertiser_id in existing:
                if existing[advertiser_id] == payload:
                    return
                raise DuplicateConflict(
                    f"conflicting outcome already recorded for {advertiser_id} in run {run_id}"
                )
            if record.status is not RunStatus.RUNNING:
                raise RunNotRunning(
                    f"run {run_id} is {record.status.value}, not accepting new outcomes"
                )
            body = json.dumps(
                {"advertiser_id": advertiser_id, "outcome": payload},
                sort_keys=True,
                separators=(",", ":"),
            ).encode("utf-8")
            log_path = self._log_path(run_id)
            offset = log_path.stat().st_size if log_path.exists() else 0
            with open(log_path, "ab") as fh:
                fh.write(_LEN.pack(len(body)))
                fh.write(body)
                fh.flush()
                os.fsync(fh.fileno())
            with open(self._idx_path(run_id), "a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {
                            "advertiser_id": advertiser_id,
                            "offset": offset,
                            "length": len(body),
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )

    def save_profiles(self, run_id: str, profiles: list[dict]) -> None:
        """Snapshot the content profiles a run classified (audit trail: the
        live corpus can drift after the run)."""
        self.open_run(run_id)
        path = self._run_dir(run_id) / "profiles.jsonl"
        if path.exists():
            return
        with open(path, "w", encoding="utf-8") as fh:
            for profile in profiles:
                fh.write(json.dumps(profile, sort_keys=True, ensure_ascii=False) + "\n")

    def read_profiles(self, run_id: str) -> list[dict]:
        self.open_run(run_id)
        return self._read_jsonl(self._run_dir(run_id) / "profiles.jsonl")

    def recorded_advertisers(self, run_id: str) -> set[str]:
        self.open_run(run_id)
        return set(self._scan_log(run_id))

    def read_outcomes(self, run_id: str) -> dict[str, Outcome]:
        self.open_run(run_id)
        return {
            advertiser_id: outcome_from_dict(obj)
            for advertiser_id, obj in self._scan_log(run_id).items()
        }

    def read_outcome(self, run_id: str, advertiser_id: str) -> Outcome:
        outcomes = self.read_outcomes(run_id)
        if advertiser_id not in outcomes:
            raise UnknownAdvertiser(
                f"no outcome recorded for {advertiser_id} in run {run_id}"
            )
        return outcomes[advertiser_id]

    # -- auxiliary append-only logs ---------------------------------------------

    def _append_jsonl(self, path: Path, record: dict) -> None:
        with self._write_lock:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    @staticmethod
    def _read_jsonl(path: Path) -> list[dict]:
        if not path.exists():
            return []
        records = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return records

    def append_reviewer_label(self, record: dict) -> None:
        record = {**record, "timestamp": record.get("timestamp") or _now_iso()}
        self._append_jsonl(self.root / "reviewer_labels.jsonl", record)

    def read_reviewer_labels(self) -> list[dict]:
        return self._read_jsonl(self.root / "reviewer_labels.jsonl")

    def append_hint_view(self, record: dict) -> None:
        record = {**record, "timestamp": record.get("timestamp") or _now_iso()}
        self._append_jsonl(self.root / "hint_views.jsonl", record)

    def read_hint_views(self) -> list[dict]:
        return self._read_jsonl(self.root / "hint_views.jsonl")
