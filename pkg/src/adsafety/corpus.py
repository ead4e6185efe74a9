"""Ad corpus ingestion: line-delimited files -> validated, advertiser-keyed dataset.

Ingestion is lenient by default (skip bad lines, report them with line numbers);
strict mode fails fast. Creative text is canonicalized here (Unicode NFC,
control characters stripped) so every downstream stage sees the same bytes.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import AdSafetyError


class Label(str, Enum):
    VIOLATING = "VIOLATING"
    NON_VIOLATING = "NON_VIOLATING"


class LabelSource(str, Enum):
    HUMAN = "HUMAN"
    KNOWN_FALSE_POSITIVE = "KNOWN_FALSE_POSITIVE"


class SchemaError(AdSafetyError):
    code = "SchemaError"


class ReferentialError(AdSafetyError):
    code = "ReferentialError"


@dataclass(frozen=True)
class AdRecord:
    ad_id: str
    advertiser_id: str
    creative_text: str
    baseline_score: float
    baseline_flagged: bool
    targeting_terms: tuple[str, ...] = ()
    destination_domain: str = ""
    label: Label | None = None
    label_source: LabelSource | None = None


@dataclass(frozen=True)
class AdvertiserRecord:
    advertiser_id: str
    display_name: str = ""
    knowledge_snippets: tuple[str, ...] = ()
    advertiser_label: Label | None = None


@dataclass
class Corpus:
    advertisers: dict[str, AdvertiserRecord]
    ads: dict[str, list[AdRecord]]
    flag_threshold: float

    def ads_for(self, advertiser_id: str) -> list[AdRecord]:
        return self.ads.get(advertiser_id, [])


@dataclass
class IngestConfig:
    strict: bool = False
    flag_threshold: float = 0.5


@dataclass(frozen=True)
class RejectedLine:
    source: str  # "ads" | "advertisers"
    line_no: int
    reason: str


@dataclass
class IngestReport:
    accepted_ads: int = 0
    accepted_advertisers: int = 0
    rejects: list[RejectedLine] = field(default_factory=list)

    @property
    def rejected(self) -> int:
        return len(self.rejects)


@dataclass(frozen=True)
class CorpusStats:
    advertisers: int
    ads: int
    flagged_ads: int
    labeled_ads: int


def canonicalize_text(raw: str) -> str:
    """Unicode NFC plus control-character stripping (newline/tab kept)."""
    text = unicodedata.normalize("NFC", raw)
    return "".join(
        ch for ch in text if ch in "\n\t" or unicodedata.category(ch) != "Cc"
    )


def _parse_label(value: object, where: str) -> Label:
    if isinstance(value, str) and value in Label.__members__:
        return Label[value]
    raise SchemaError(f"{where}: invalid label {value!r}")


def _ad_from_obj(obj: dict, flag_threshold: float) -> AdRecord:
    """Validate one ads.jsonl object. Raises SchemaError with the exact reason."""
    for key in ("ad_id", "advertiser_id", "creative_text", "baseline_score"):
        if key not in obj:
            raise SchemaError(f"missing field {key}")
    ad_id = obj["ad_id"]
    advertiser_id = obj["advertiser_id"]
    creative = obj["creative_text"]
    score = obj["baseline_score"]
    if not isinstance(ad_id, str) or not ad_id:
        raise SchemaError("ad_id must be a non-empty string")
    if not isinstance(advertiser_id, str) or not advertiser_id:
        raise SchemaError("advertiser_id must be a non-empty string")
    if not isinstance(creative, str):
        raise SchemaError("creative_text must be a string")
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise SchemaError("baseline_score must be a number")
    score = float(score)
    if not 0.0 <= score <= 1.0:
        raise SchemaError(f"baseline_score {score} outside [0,1]")

    terms = obj.get("targeting_terms", [])
    if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
        raise SchemaError("targeting_terms must be a list of strings")
    domain = obj.get("destination_domain", "")
    if not isinstance(domain, str):
        raise SchemaError("destination_domain must be a string")

    flagged = obj.get("baseline_flagged")
    if flagged is None:
        flagged = score >= flag_threshold
    elif not isinstance(flagged, bool):
        raise SchemaError("baseline_flagged must be a boolean")
    if flagged and score < flag_threshold:
        raise SchemaError(
            f"baseline_flagged=true but baseline_score {score} < flag threshold {flag_threshold}"
        )

    label = None
    if obj.get("label") is not None:
        label = _parse_label(obj["label"], "label")
    label_source = None
    if obj.get("label_source") is not None:
        raw_source = obj["label_source"]
        if not isinstance(raw_source, str) or raw_source not in LabelSource.__members__:
            raise SchemaError(f"invalid label_source {raw_source!r}")
        label_source = LabelSource[raw_source]
    if label_source is LabelSource.KNOWN_FALSE_POSITIVE:
        if not flagged:
            raise SchemaError("KNOWN_FALSE_POSITIVE requires baseline_flagged=true")
        if label is not Label.NON_VIOLATING:
            raise SchemaError("KNOWN_FALSE_POSITIVE requires label=NON_VIOLATING")
    if label_source is not None and label is None:
        raise SchemaError("label_source present without label")

    return AdRecord(
        ad_id=ad_id,
        advertiser_id=advertiser_id,
        creative_text=canonicalize_text(creative),
        baseline_score=score,
        baseline_flagged=flagged,
        targeting_terms=tuple(terms),
        destination_domain=domain,
        label=label,
        label_source=label_source,
    )


def _advertiser_from_obj(obj: dict) -> AdvertiserRecord:
    if "advertiser_id" not in obj:
        raise SchemaError("missing field advertiser_id")
    advertiser_id = obj["advertiser_id"]
    if not isinstance(advertiser_id, str) or not advertiser_id:
        raise SchemaError("advertiser_id must be a non-empty string")
    name = obj.get("display_name", "")
    if not isinstance(name, str):
        raise SchemaError("display_name must be a string")
    snippets = obj.get("knowledge_snippets", [])
    if not isinstance(snippets, list) or not all(isinstance(s, str) for s in snippets):
        raise SchemaError("knowledge_snippets must be a list of strings")
    label = None
    if obj.get("advertiser_label") is not None:
        label = _parse_label(obj["advertiser_label"], "advertiser_label")
    return AdvertiserRecord(
        advertiser_id=advertiser_id,
        display_name=name,
        knowledge_snippets=tuple(snippets),
        advertiser_label=label,
    )


def _iter_jsonl(path: Path):
    """Yield (line_no, parsed_object_or_SchemaError). Blank lines skipped silently."""
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield line_no, SchemaError(f"invalid JSON: {exc.msg}")
                continue
            if not isinstance(obj, dict):
                yield line_no, SchemaError("line is not a JSON object")
                continue
            yield line_no, obj


def load_corpus(
    ads_path: str | Path,
    advertisers_path: str | Path,
    config: IngestConfig | None = None,
) -> tuple[Corpus, IngestReport]:
    """Load and validate both files. Lenient mode skips bad lines and reports them;
    strict mode raises on the first schema or referential error."""
    config = config or IngestConfig()
    report = IngestReport()
    advertisers: dict[str, AdvertiserRecord] = {}
    ads: dict[str, list[AdRecord]] = {}

    def reject(source: str, line_no: int, reason: str, strict_exc: AdSafetyError) -> None:
        if config.strict:
            raise strict_exc
        report.rejects.append(RejectedLine(source, line_no, reason))

    for line_no, item in _iter_jsonl(Path(advertisers_path)):
        if isinstance(item, SchemaError):
            reject("advertisers", line_no, str(item), item)
            continue
        try:
            rec = _advertiser_from_obj(item)
        except SchemaError as exc:
            reject("advertisers", line_no, str(exc), exc)
            continue
        if rec.advertiser_id in advertisers:
            exc = SchemaError(f"duplicate advertiser_id {rec.advertiser_id}")
            reject("advertisers", line_no, str(exc), exc)
            continue
        advertisers[rec.advertiser_id] = rec
        ads[rec.advertiser_id] = []
        report.accepted_advertisers += 1

    seen_ad_ids: set[str] = set()
    for line_no, item in _iter_jsonl(Path(ads_path)):
        if isinstance(item, SchemaError):
            reject("ads", line_no, str(item), item)
            continue
        try:
            rec = _ad_from_obj(item, config.flag_threshold)
        except SchemaError as exc:
            reject("ads", line_no, str(exc), exc)
            continue
        if rec.ad_id in seen_ad_ids:
            exc = SchemaError(f"duplicate ad_id {rec.ad_id}")
            reject("ads", line_no, str(exc), exc)
            continue
        if rec.advertiser_id not in advertisers:
            err = ReferentialError(
                f"ad {rec.ad_id} references unknown advertiser {rec.advertiser_id}"
            )
            reject("ads", line_no, str(err), err)
            continue
        seen_ad_ids.add(rec.ad_id)
        ads[rec.advertiser_id].append(rec)
        report.accepted_ads += 1

    return Corpus(advertisers=advertisers, ads=ads, flag_threshold=config.flag_threshold), report


def corpus_stats(corpus: Corpus) -> CorpusStats:
    all_ads = [ad for ad_list in corpus.ads.values() for ad in ad_list]
    return CorpusStats(
        advertisers=len(corpus.advertisers),
        ads=len(all_ads),
        flagged_ads=sum(1 for ad in all_ads if ad.baseline_flagged),
        labeled_ads=sum(1 for ad in all_ads if ad.label is not None),
    )


def ad_to_dict(ad: AdRecord) -> dict:
    obj = {
        "ad_id": ad.ad_id,
        "advertiser_id": ad.advertiser_id,
        "creative_text": ad.creative_text,
        "baseline_score": ad.baseline_score,
        "baseline_flagged": ad.baseline_flagged,
        "targeting_terms": list(ad.targeting_terms),
        "destination_domain": ad.destination_domain,
    }
    if ad.label is not None:
        obj["label"] = ad.label.value
    if ad.label_source is not None:
        obj["label_source"] = ad.label_source.value
    return obj


def advertiser_to_dict(rec: AdvertiserRecord) -> dict:
    obj = {
        "advertiser_id": rec.advertiser_id,
        "display_name": rec.display_name,
        "knowledge_snippets": list(rec.knowledge_snippets),
    }
    if rec.advertiser_label is not None:
        obj["advertiser_label"] = rec.advertiser_label.value
    return obj


def save_corpus(corpus: Corpus, ads_path: str | Path, advertisers_path: str | Path) -> None:
    """Serialize deterministically: advertisers sorted by id, ads in stored order,
    canonical JSON separators. Same corpus => byte-identical files."""
    with open(advertisers_path, "w", encoding="utf-8") as fh:
        for advertiser_id in sorted(corpus.advertisers):
            fh.write(
                json.dumps(
                    advertiser_to_dict(corpus.advertisers[advertiser_id]),
                    sort_keys=True,
                    separators=(",", ":"),
                    ensure_ascii=False,
                )
                + "\n"
            )
    with open(ads_path, "w", encoding="utf-8") as fh:
        for advertiser_id in sorted(corpus.advertisers):
            for ad in corpus.ads[advertiser_id]:
                fh.write(
                    json.dumps(
                        ad_to_dict(ad),
                        sort_keys=True,
                        separators=(",", ":"),
                        ensure_ascii=False,
                    )
                    + "\n"
                )
