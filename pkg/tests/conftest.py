"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the code paths they check: metric counting
is a direct tally loop, dedup grouping is a dict-based group-by over the same
normalization contract.
"""

from __future__ import annotations

from fractions import Fraction

import pytest

from adsafety.corpus import AdRecord, AdvertiserRecord, Label, LabelSource
from adsafety.promptkit import ParseError, Verdict


def make_ad(
    ad_id: str,
    advertiser_id: str = "adv",
    text: str = "some ad text",
    score: float = 0.0,
    flagged: bool | None = None,
    label: Label | None = None,
    label_source: LabelSource | None = None,
    terms: tuple[str, ...] = (),
    domain: str = "",
) -> AdRecord:
    if flagged is None:
        flagged = score >= 0.5
    return AdRecord(
        ad_id=ad_id,
        advertiser_id=advertiser_id,
        creative_text=text,
        baseline_score=score,
        baseline_flagged=flagged,
        targeting_terms=terms,
        destination_domain=domain,
        label=label,
        label_source=label_source,
    )


def make_advertiser(advertiser_id: str = "adv", label: Label | None = None) -> AdvertiserRecord:
    return AdvertiserRecord(advertiser_id=advertiser_id, advertiser_label=label)


def make_verdict(advertiser_id: str, decision: Label, revision: int = 1) -> Verdict:
    return Verdict(
        advertiser_id=advertiser_id,
        decision=decision,
        advertiser_summary=f"summary for {advertiser_id}",
        products_services=f"products of {advertiser_id}",
        rationale="because",
        raw_response="raw",
        template_revision=revision,
    )


def make_parse_error(advertiser_id: str) -> ParseError:
    return ParseError(
        kind="missing_section",
        detail="missing or empty section DECISION",
        raw="garbled",
        advertiser_id=advertiser_id,
    )


def eval_fixture_10() -> tuple[list[tuple[str, Verdict]], dict[str, Label]]:
    """10 advertisers, 7 truly good; predictions call 6 good of which 5 truly
    good. Hand-enumerated: tp=5 fp=1 fn=2 tn=2 -> precision 5/6, recall 5/7,
    accuracy 7/10."""
    labels = {f"g{i}": Label.NON_VIOLATING for i in range(1, 8)}
    labels.update({f"b{i}": Label.VIOLATING for i in range(1, 4)})
    predictions = {
        "g1": Label.NON_VIOLATING,
        "g2": Label.NON_VIOLATING,
        "g3": Label.NON_VIOLATING,
        "g4": Label.NON_VIOLATING,
        "g5": Label.NON_VIOLATING,
        "g6": Label.VIOLATING,
        "g7": Label.VIOLATING,
        "b1": Label.NON_VIOLATING,
        "b2": Label.VIOLATING,
        "b3": Label.VIOLATING,
    }
    verdicts = [
        (advertiser_id, make_verdict(advertiser_id, decision))
        for advertiser_id, decision in sorted(predictions.items())
    ]
    return verdicts, labels


def brute_force_metrics(
    verdicts: list[tuple[str, Verdict | ParseError]],
    labels: dict[str, Label],
) -> dict:
    """Independent oracle: direct counting, exact Fraction arithmetic."""
    tp = fp = tn = fn = unparsed = 0
    for advertiser_id, outcome in verdicts:
        truth = labels[advertiser_id]
        if isinstance(outcome, ParseError):
            unparsed += 1
            continue
        said_good = outcome.decision == Label.NON_VIOLATING
        is_good = truth == Label.NON_VIOLATING
        if said_good and is_good:
            tp += 1
        elif said_good and not is_good:
            fp += 1
        elif not said_good and is_good:
            fn += 1
        else:
            tn += 1

    def ratio(num: int, den: int) -> float | None:
        return None if den == 0 else float(Fraction(num, den))

    return {
        "tp": tp,
        "fp": fp,
        "tn": tn,
        "fn": fn,
        "unparsed": unparsed,
        "precision": ratio(tp, tp + fp),
        "recall": ratio(tp, tp + fn),
        "accuracy": ratio(tp + tn, tp + fp + tn + fn),
    }


@pytest.fixture
def demo_workspace(tmp_path):
    from adsafety.demo import build_demo_workspace

    return build_demo_workspace(tmp_path / "demo")
