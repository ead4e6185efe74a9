"""Advertiser content profiles: bucket, aggregate, and deduplicate ad signals.

Ads are split into three evidence buckets (known false positives, already
labeled, most relevant by baseline score), merged on normalized-text equality,
and capped by a per-bucket budget so the profile stays prompt-sized.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import Enum

from .corpus import AdRecord, AdvertiserRecord, Label, LabelSource
from .errors import AdSafetyError
from .funnel import MixedAdvertiser


class BucketKind(str, Enum):
    KNOWN_FALSE_POSITIVE = "KNOWN_FALSE_POSITIVE"
    ALREADY_LABELED = "ALREADY_LABELED"
    MOST_RELEVANT = "MOST_RELEVANT"


# Priority order used everywhere: evidence buckets before relevance.
BUCKET_PRIORITY = (
    BucketKind.KNOWN_FALSE_POSITIVE,
    BucketKind.ALREADY_LABELED,
    BucketKind.MOST_RELEVANT,
)


class BudgetError(AdSafetyError):
    code = "BudgetError"


@dataclass
class ProfileItem:
    text: str
    source_ad_ids: list[str]
    occurrence_count: int
    baseline_score: float
    label: Label | None = None
    conflicting_labels: tuple[Label, ...] = ()

    @property
    def first_ad_id(self) -> str:
        return min(self.source_ad_ids)


@dataclass
class ProfileBucket:
    kind: BucketKind
    items: list[ProfileItem] = field(default_factory=list)


@dataclass
class DedupStats:
    input_items: int
    output_items: int


@dataclass
class ContentProfile:
    advertiser_id: str
    display_name: str
    buckets: dict[BucketKind, ProfileBucket]
    targeting_terms: list[str]
    domains: list[str]
    knowledge_snippets: list[str]
    dedup_stats: DedupStats

    def bucket(self, kind: BucketKind) -> ProfileBucket:
        return self.buckets[kind]

    @property
    def total_items(self) -> int:
        return sum(len(b.items) for b in self.buckets.values())


@dataclass
class BudgetConfig:
    max_items: int = 30
    known_false_positive_quota: int = 10
    already_labeled_quota: int = 10
    most_relevant_quota: int = 10
    relevance_rank: str = "BY_BASELINE_SCORE_DESC"

    def quota_for(self, kind: BucketKind) -> int:
        return {
            BucketKind.KNOWN_FALSE_POSITIVE: self.known_false_positive_quota,
            BucketKind.ALREADY_LABELED: self.already_labeled_quota,
            BucketKind.MOST_RELEVANT: self.most_relevant_quota,
        }[kind]

    def validate(self) -> None:
        if self.max_items < 1:
            raise BudgetError(f"max_items must be >= 1, got {self.max_items}")
        quotas = [self.quota_for(kind) for kind in BUCKET_PRIORITY]
        if any(q < 0 for q in quotas):
            raise BudgetError("bucket quotas must be >= 0")
        if sum(quotas) > self.max_items:
            raise BudgetError(
                f"bucket quotas sum to {sum(quotas)}, exceeding max_items {self.max_items}"
            )
        if self.relevance_rank != "BY_BASELINE_SCORE_DESC":
            raise BudgetError(f"unknown relevance_rank {self.relevance_rank!r}")


def normalize_text(raw: str) -> str:
    """Canonical dedup key: Unicode NFC, lowercase, whitespace collapsed."""
    return " ".join(unicodedata.normalize("NFC", raw).lower().split())


def dedup_items(
    items: list[tuple[str, str, float, Label | None]],
) -> list[ProfileItem]:
    """Merge entries with equal normalized text into one ProfileItem.

    Occurrence counts sum, baseline_score takes the max, conflicting labels are
    kept as an annotation rather than resolved. Entries whose normalized text
    is empty are dropped. Output keeps first-occurrence order.
    """
    merged: dict[str, ProfileItem] = {}
    labels_seen: dict[str, set[Label]] = {}
    order: list[str] = []
    for text, ad_id, score, label in items:
        key = normalize_text(text)
        if not key:
            continue
        if key not in merged:
            merged[key] = ProfileItem(
                text=key, source_ad_ids=[], occurrence_count=0, baseline_score=score
            )
            labels_seen[key] = set()
            order.append(key)
        item = merged[key]
        item.occurrence_count += 1
        if ad_id not in item.source_ad_ids:
            item.source_ad_ids.append(ad_id)
        item.baseline_score = max(item.baseline_score, score)
        if label is not None:
            labels_seen[key].add(label)

    out = []
    for key in order:
        item = merged[key]
        seen = labels_seen[key]
        if len(seen) == 1:
            item.label = next(iter(seen))
        elif len(seen) > 1:
            item.conflicting_labels = (Label.VIOLATING, Label.NON_VIOLATING)
        out.append(item)
    return out


def _merge_into(target: ProfileItem, other: ProfileItem) -> None:
    target.occurrence_count += other.occurrence_count
    for ad_id in other.source_ad_ids:
        if ad_id not in target.source_ad_ids:
            target.source_ad_ids.append(ad_id)
    target.baseline_score = max(target.baseline_score, other.baseline_score)
    labels = {lab for lab in (target.label, other.label) if lab is not None}
    if target.conflicting_labels or other.conflicting_labels or len(labels) > 1:
        target.label = None
        target.conflicting_labels = (Label.VIOLATING, Label.NON_VIOLATING)
    elif labels:
        target.label = next(iter(labels))


def build_profile(
    advertiser: AdvertiserRecord,
    ads: list[AdRecord],
    budget: BudgetConfig,
) -> ContentProfile:
    """Bucket, dedup, and truncate the advertiser's ads into a ContentProfile.

    Bucket precedence on duplicate text is KNOWN_FALSE_POSITIVE >
    ALREADY_LABELED > MOST_RELEVANT, except that a label conflict always lands
    in ALREADY_LABELED. Budget headroom beyond the quota sum spills to
    MOST_RELEVANT only, never to the evidence buckets. Ads are processed in
    ad_id order, so the result does not depend on input order.
    """
    budget.validate()
    if any(ad.advertiser_id != advertiser.advertiser_id for ad in ads):
        raise MixedAdvertiser(
            f"ads do not all belong to advertiser {advertiser.advertiser_id}"
        )

    ordered = sorted(ads, key=lambda ad: ad.ad_id)
    partitions: dict[BucketKind, list[AdRecord]] = {kind: [] for kind in BUCKET_PRIORITY}
    for ad in ordered:
        if ad.label_source is LabelSource.KNOWN_FALSE_POSITIVE:
            partitions[BucketKind.KNOWN_FALSE_POSITIVE].append(ad)
        elif ad.label is not None:
            partitions[BucketKind.ALREADY_LABELED].append(ad)
        else:
            partitions[BucketKind.MOST_RELEVANT].append(ad)

    # Dedup within each bucket, then merge cross-bucket duplicates into the
    # highest-precedence occurrence.
    placed: dict[str, tuple[BucketKind, ProfileItem]] = {}
    buckets: dict[BucketKind, list[ProfileItem]] = {kind: [] for kind in BUCKET_PRIORITY}
    for kind in BUCKET_PRIORITY:
        tuples = [
            (ad.creative_text, ad.ad_id, ad.baseline_score, ad.label)
            for ad in partitions[kind]
        ]
        for item in dedup_items(tuples):
            if item.text in placed:
                _, existing = placed[item.text]
                _merge_into(existing, item)
            else:
                placed[item.text] = (kind, item)
                buckets[kind].append(item)

    # A label conflict is explicit human evidence in disagreement: surface it
    # in ALREADY_LABELED regardless of where the item first landed.
    for kind in (BucketKind.KNOWN_FALSE_POSITIVE, BucketKind.MOST_RELEVANT):
        keep = []
        for item in buckets[kind]:
            if item.conflicting_labels:
                buckets[BucketKind.ALREADY_LABELED].append(item)
            else:
                keep.append(item)
        buckets[kind] = keep

    for kind in (BucketKind.KNOWN_FALSE_POSITIVE, BucketKind.ALREADY_LABELED):
        buckets[kind].sort(key=lambda item: item.first_ad_id)
    buckets[BucketKind.MOST_RELEVANT].sort(
        key=lambda item: (-item.baseline_score, item.first_ad_id)
    )

    # Evidence buckets are capped at exactly their quotas; only the max_items
    # headroom beyond the quota sum spills, and only into MOST_RELEVANT.
    kept: dict[BucketKind, list[ProfileItem]] = {}
    for kind in (BucketKind.KNOWN_FALSE_POSITIVE, BucketKind.ALREADY_LABELED):
        kept[kind] = buckets[kind][: budget.quota_for(kind)]
    headroom = budget.max_items - sum(budget.quota_for(kind) for kind in BUCKET_PRIORITY)
    relevant_quota = budget.quota_for(BucketKind.MOST_RELEVANT) + headroom
    kept[BucketKind.MOST_RELEVANT] = buckets[BucketKind.MOST_RELEVANT][:relevant_quota]

    terms = sorted({term for ad in ads for term in ad.targeting_terms})
    domains = sorted({ad.destination_domain for ad in ads if ad.destination_domain})

    return ContentProfile(
        advertiser_id=advertiser.advertiser_id,
        display_name=advertiser.display_name,
        buckets={kind: ProfileBucket(kind=kind, items=kept[kind]) for kind in BUCKET_PRIORITY},
        targeting_terms=terms,
        domains=domains,
        knowledge_snippets=list(advertiser.knowledge_snippets),
        dedup_stats=DedupStats(
            input_items=len(ads),
            output_items=sum(len(items) for items in kept.values()),
        ),
    )


def item_to_dict(item: ProfileItem) -> dict:
    return {
        "text": item.text,
        "source_ad_ids": list(item.source_ad_ids),
        "occurrence_count": item.occurrence_count,
        "baseline_score": item.baseline_score,
        "label": item.label.value if item.label else None,
        "conflicting_labels": [lab.value for lab in item.conflicting_labels],
    }


def profile_to_dict(profile: ContentProfile) -> dict:
    return {
        "advertiser_id": profile.advertiser_id,
        "display_name": profile.display_name,
        "buckets": {
            kind.value: [item_to_dict(item) for item in profile.buckets[kind].items]
            for kind in BUCKET_PRIORITY
        },
        "targeting_terms": list(profile.targeting_terms),
        "domains": list(profile.domains),
        "knowledge_snippets": list(profile.knowledge_snippets),
        "dedup_stats": {
            "input_items": profile.dedup_stats.input_items,
            "output_items": profile.dedup_stats.output_items,
        },
    }
