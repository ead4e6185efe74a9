"""Candidate selection: rank advertisers by how over-flagged their ads look.

Evaluating every advertiser is too expensive, so the funnel scores each one by
the share of its ads the baseline classifier flagged, boosted by the share of
confirmed false positives, and keeps the top of the list.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import AdRecord, Corpus, LabelSource
from .errors import AdSafetyError


class EmptyAdList(AdSafetyError):
    code = "EmptyAdList"


class MixedAdvertiser(AdSafetyError):
    code = "MixedAdvertiser"


@dataclass(frozen=True)
class OverflagScore:
    advertiser_id: str
    flagged_count: int
    total_ads: int
    known_fp_count: int
    score: float


@dataclass
class FunnelConfig:
    min_flagged: int = 1
    top_k: int | None = None
    score_floor: float = 0.0
    fp_boost: float = 0.5

    def validate(self) -> None:
        if self.min_flagged < 0:
            raise AdSafetyError(f"min_flagged must be >= 0, got {self.min_flagged}")
        if self.top_k is not None and self.top_k < 1:
            raise AdSafetyError(f"top_k must be >= 1, got {self.top_k}")
        if not 0.0 <= self.score_floor <= 1.0:
            raise AdSafetyError(f"score_floor must be in [0,1], got {self.score_floor}")
        if self.fp_boost < 0:
            raise AdSafetyError(f"fp_boost must be >= 0, got {self.fp_boost}")


def score_advertiser(ads: list[AdRecord], config: FunnelConfig) -> OverflagScore:
    """score = min(1, flagged/total + fp_boost * known_fp/total)."""
    if not ads:
        raise EmptyAdList("cannot score an advertiser with no ads")
    advertiser_ids = {ad.advertiser_id for ad in ads}
    if len(advertiser_ids) != 1:
        raise MixedAdvertiser(f"ads span multiple advertisers: {sorted(advertiser_ids)}")

    total = len(ads)
    flagged = sum(1 for ad in ads if ad.baseline_flagged)
    known_fp = sum(
        1 for ad in ads if ad.label_source is LabelSource.KNOWN_FALSE_POSITIVE
    )
    score = 0.0
    if flagged:
        score = min(1.0, flagged / total + config.fp_boost * (known_fp / total))
    return OverflagScore(
        advertiser_id=ads[0].advertiser_id,
        flagged_count=flagged,
        total_ads=total,
        known_fp_count=known_fp,
        score=score,
    )


def select_candidates(corpus: Corpus, config: FunnelConfig) -> list[str]:
    """Eligible advertisers sorted by score descending, ties broken by id
    ascending, truncated to top_k. Advertisers with zero ads are ineligible."""
    config.validate()
    scored: list[OverflagScore] = []
    for advertiser_id, ads in corpus.ads.items():
        if not ads:
            continue
        result = score_advertiser(ads, config)
        if result.flagged_count < config.min_flagged:
            continue
        if result.score < config.score_floor:
            continue
        scored.append(result)
    scored.sort(key=lambda s: (-s.score, s.advertiser_id))
    selected = [s.advertiser_id for s in scored]
    if config.top_k is not None:
        selected = selected[: config.top_k]
    return selected
