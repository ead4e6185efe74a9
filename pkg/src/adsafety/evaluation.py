"""Dataset splits and evaluation metrics.

The positive class is the NON-violating ("good") advertiser: precision is the
share of truly good advertisers among those called good, recall the share of
truly good advertisers the classifier finds. This inverts the usual moderation
convention and is stated loudly in every report header. Unparseable verdicts
are counted separately, never coerced into a class.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .corpus import Corpus, Label
from .errors import AdSafetyError
from .promptkit import ParseError, Verdict


class Split(str, Enum):
    TUNE_A = "TUNE_A"
    TUNE_B = "TUNE_B"
    HOLDOUT = "HOLDOUT"


class BadRatios(AdSafetyError):
    code = "BadRatios"


class MissingLabel(AdSafetyError):
    code = "MissingLabel"

    def __init__(self, advertiser_id: str):
        super().__init__(f"no ground-truth label for advertiser {advertiser_id}")
        self.advertiser_id = advertiser_id


class IncomparableRuns(AdSafetyError):
    code = "IncomparableRuns"


@dataclass(frozen=True)
class SplitAssignment:
    advertiser_id: str
    split: Split


@dataclass(frozen=True)
class SplitRatios:
    tune_a: float
    tune_b: float
    holdout: float

    def validate(self) -> None:
        parts = (self.tune_a, self.tune_b, self.holdout)
        if any(p < 0 for p in parts):
            raise BadRatios(f"ratios must be non-negative, got {parts}")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise BadRatios(f"ratios must sum to 1, got {sum(parts)}")


def _unit_hash(salt: str, advertiser_id: str) -> float:
    """Deterministic point in [0,1) from (salt, advertiser_id)."""
    digest = hashlib.sha256(f"{salt}:{advertiser_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def split_for(advertiser_id: str, ratios: SplitRatios, salt: str) -> Split:
    ratios.validate()
    u = _unit_hash(salt, advertiser_id)
    if u < ratios.tune_a:
        return Split.TUNE_A
    if u < ratios.tune_a + ratios.tune_b:
        return Split.TUNE_B
    return Split.HOLDOUT


def assign_splits(
    advertiser_ids: list[str], ratios: SplitRatios, salt: str
) -> list[SplitAssignment]:
    ratios.validate()
    return [
        SplitAssignment(advertiser_id, split_for(advertiser_id, ratios, salt))
        for advertiser_id in advertiser_ids
    ]


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    unparsed: int = 0

    @property
    def decided(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def evaluated(self) -> int:
        return self.decided + self.unparsed


# Per-advertiser prediction values stored in reports.
PRED_GOOD = "NON_VIOLATING"
PRED_BAD = "VIOLATING"
PRED_UNPARSED = "UNPARSED"


@dataclass
class EvalReport:
    run_id: str
    split: Split | None
    matrix: ConfusionMatrix
    accuracy: float | None
    precision: float | None
    recall: float | None
    template_revision: int
    parse_failure_rate: float | None
    labels: dict[str, Label] = field(default_factory=dict)
    predictions: dict[str, str] = field(default_factory=dict)


def compute_metrics(
    verdicts: list[tuple[str, Verdict | ParseError]],
    labels: dict[str, Label],
    *,
    run_id: str = "",
    split: Split | None = None,
    template_revision: int = 0,
) -> EvalReport:
    """Count the confusion matrix with positive class NON_VIOLATING.

    Parse failures go to `unparsed` and into the parse-failure rate only;
    undefined metrics stay None (reported as "n/a"), never 0.
    """
    matrix = ConfusionMatrix()
    predictions: dict[str, str] = {}
    used_labels: dict[str, Label] = {}
    for advertiser_id, outcome in verdicts:
        if advertiser_id not in labels:
            raise MissingLabel(advertiser_id)
        truth = labels[advertiser_id]
        used_labels[advertiser_id] = truth
        if isinstance(outcome, ParseError):
            matrix.unparsed += 1
            predictions[advertiser_id] = PRED_UNPARSED
            continue
        predicted_good = outcome.decision is Label.NON_VIOLATING
        truly_good = truth is Label.NON_VIOLATING
        predictions[advertiser_id] = PRED_GOOD if predicted_good else PRED_BAD
        if predicted_good and truly_good:
            matrix.tp += 1
        elif predicted_good and not truly_good:
            matrix.fp += 1
        elif not predicted_good and truly_good:
            matrix.fn += 1
        else:
            matrix.tn += 1

    precision = matrix.tp / (matrix.tp + matrix.fp) if matrix.tp + matrix.fp else None
    recall = matrix.tp / (matrix.tp + matrix.fn) if matrix.tp + matrix.fn else None
    accuracy = (matrix.tp + matrix.tn) / matrix.decided if matrix.decided else None
    parse_rate = matrix.unparsed / matrix.evaluated if matrix.evaluated else None

    return EvalReport(
        run_id=run_id,
        split=split,
        matrix=matrix,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        template_revision=template_revision,
        parse_failure_rate=parse_rate,
        labels=used_labels,
        predictions=predictions,
    )


def _fmt_metric(value: float | None) -> str:
    return "n/a" if value is None else f"{value * 100:.0f}%"


def format_report(report: EvalReport) -> str:
    """Fixed-width table in the Accuracy | Precision | Recall column order."""
    header = [
        f"run: {report.run_id or '(unsaved)'}"
        + (f"  split: {report.split.value}" if report.split else "")
        + f"  template revision: {report.template_revision}",
        "positive class: NON_VIOLATING (good advertiser) -- precision/recall are",
        "rates of correctly identifying GOOD advertisers, not violations.",
        "",
    ]
    cols = ("Accuracy", "Precision", "Recall")
    vals = (
        _fmt_metric(report.accuracy),
        _fmt_metric(report.precision),
        _fmt_metric(report.recall),
    )
    width = 11
    sep = "+" + "+".join("-" * width for _ in cols) + "+"
    row_names = "|" + "|".join(c.center(width) for c in cols) + "|"
    row_vals = "|" + "|".join(v.center(width) for v in vals) + "|"
    m = report.matrix
    footer = [
        "",
        f"tp={m.tp} fp={m.fp} tn={m.tn} fn={m.fn} unparsed={m.unparsed}"
        f" (evaluated: {m.evaluated})",
        f"parse failure rate: {_fmt_metric(report.parse_failure_rate)}",
    ]
    return "\n".join(header + [sep, row_names, sep, row_vals, sep] + footer)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "run_id": report.run_id,
        "split": report.split.value if report.split else None,
        "positive_class": "NON_VIOLATING",
        "matrix": {
            "tp": report.matrix.tp,
            "fp": report.matrix.fp,
            "tn": report.matrix.tn,
            "fn": report.matrix.fn,
            "unparsed": report.matrix.unparsed,
        },
        "accuracy": report.accuracy,
        "precision": report.precision,
        "recall": report.recall,
        "parse_failure_rate": report.parse_failure_rate,
        "template_revision": report.template_revision,
        "labels": {k: v.value for k, v in sorted(report.labels.items())},
        "predictions": dict(sorted(report.predictions.items())),
    }


def report_from_dict(obj: dict) -> EvalReport:
    matrix = ConfusionMatrix(**obj["matrix"])
    return EvalReport(
        run_id=obj["run_id"],
        split=Split(obj["split"]) if obj.get("split") else None,
        matrix=matrix,
        accuracy=obj["accuracy"],
        precision=obj["precision"],
        recall=obj["recall"],
        template_revision=obj["template_revision"],
        parse_failure_rate=obj["parse_failure_rate"],
        labels={k: Label(v) for k, v in obj.get("labels", {}).items()},
        predictions=dict(obj.get("predictions", {})),
    )


@dataclass
class MetricsDelta:
    accuracy_delta: float | None
    precision_delta: float | None
    recall_delta: float | None
    good_to_bad: list[str]
    bad_to_good: list[str]
    fixed_parse: list[str]
    broke_parse: list[str]

    @property
    def flip_count(self) -> int:
        return (
            len(self.good_to_bad)
            + len(self.bad_to_good)
            + len(self.fixed_parse)
            + len(self.broke_parse)
        )


def _delta(before: float | None, after: float | None) -> float | None:
    if before is None or after is None:
        return None
    return after - before


def compare_reports(before: EvalReport, after: EvalReport) -> MetricsDelta:
    """Signed per-metric deltas plus the per-advertiser flip lists. Runs over
    different splits or label sets are incomparable by design."""
    if before.split != after.split:
        raise IncomparableRuns(
            f"splits differ: {before.split} vs {after.split}"
        )
    if before.labels != after.labels:
        raise IncomparableRuns("label sets differ between runs")

    good_to_bad: list[str] = []
    bad_to_good: list[str] = []
    fixed_parse: list[str] = []
    broke_parse: list[str] = []
    for advertiser_id in sorted(set(before.predictions) & set(after.predictions)):
        b = before.predictions[advertiser_id]
        a = after.predictions[advertiser_id]
        if b == a:
            continue
        if b == PRED_UNPARSED:
            fixed_parse.append(advertiser_id)
        elif a == PRED_UNPARSED:
            broke_parse.append(advertiser_id)
        elif b == PRED_GOOD and a == PRED_BAD:
            good_to_bad.append(advertiser_id)
        elif b == PRED_BAD and a == PRED_GOOD:
            bad_to_good.append(advertiser_id)

    return MetricsDelta(
        accuracy_delta=_delta(before.accuracy, after.accuracy),
        precision_delta=_delta(before.precision, after.precision),
        recall_delta=_delta(before.recall, after.recall),
        good_to_bad=good_to_bad,
        bad_to_good=bad_to_good,
        fixed_parse=fixed_parse,
        broke_parse=broke_parse,
    )


def load_label_overrides(path: str | Path) -> dict[str, Label]:
    """labels.jsonl override file: one {advertiser_id, label} object per line."""
    overrides: dict[str, Label] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "advertiser_id" not in obj or "label" not in obj:
                raise AdSafetyError(f"{path}:{line_no}: need advertiser_id and label")
            overrides[obj["advertiser_id"]] = Label[obj["label"]]
    return overrides


def collect_labels(corpus: Corpus, overrides_path: str | Path | None = None) -> dict[str, Label]:
    """Ground truth = advertiser_label from the corpus, overlaid by labels.jsonl."""
    labels = {
        advertiser_id: rec.advertiser_label
        for advertiser_id, rec in corpus.advertisers.items()
        if rec.advertiser_label is not None
    }
    if overrides_path is not None:
        labels.update(load_label_overrides(overrides_path))
    return labels
