from __future__ import annotations

import random
from collections import defaultdict

import pytest

from adsafety.corpus import Label, LabelSource
from adsafety.funnel import MixedAdvertiser
from adsafety.profiler import (
    BucketKind,
    BudgetConfig,
    BudgetError,
    ProfileItem,
    build_profile,
    dedup_items,
    normalize_text,
)

from .conftest import make_ad, make_advertiser

WORDS = ["buy", "now", "sale", "shoes", "red", "big", "deal", "free"]


def random_tuples(rng: random.Random, n: int):
    out = []
    for i in range(n):
        words = [rng.choice(WORDS) for _ in range(rng.randint(0, 4))]
        # random casing and spacing so normalization has work to do
        text = "  ".join(w.upper() if rng.random() < 0.3 else w for w in words)
        out.append((text, f"ad{i}", round(rng.random(), 3), None))
    return out


def replay(items: list[ProfileItem]):
    """Expand merged items back into one tuple per merged occurrence."""
    tuples = []
    for item in items:
        for k in range(item.occurrence_count):
            ad_id = item.source_ad_ids[min(k, len(item.source_ad_ids) - 1)]
            tuples.append((item.text, ad_id, item.baseline_score, item.label))
    return tuples


# -- normalize_text -------------------------------------------------------------


def test_normalize_whitespace_and_case():
    assert normalize_text("  Buy  NOW ") == "buy now"


def test_normalize_empty_fixed_point():
    assert normalize_text("") == ""
    assert normalize_text(normalize_text("  A  b ")) == normalize_text("  A  b ")


def test_normalize_nonbreaking_space():
    # frozen expectation, checked by hand against the Unicode whitespace rules
    assert normalize_text("Déjà Vu") == "déjà vu"
    # decomposed input normalizes to the same canonical form
    assert normalize_text("Déjà Vu") == "déjà vu"


# -- dedup_items ---------------------------------------------------------------


def test_exact_duplicates_merge():
    items = dedup_items([
        ("Buy now", "a1", 0.2, None),
        ("Buy now", "a2", 0.5, None),
    ])
    assert len(items) == 1
    assert items[0].occurrence_count == 2
    assert items[0].source_ad_ids == ["a1", "a2"]
    assert items[0].baseline_score == 0.5


def test_normalization_equality_merges():
    items = dedup_items([
        ("Buy Now!", "a1", 0.1, None),
        ("buy   now!", "a2", 0.2, None),
    ])
    assert len(items) == 1


def test_dedup_empty_input():
    assert dedup_items([]) == []


def test_dedup_drops_empty_text():
    items = dedup_items([("   ", "a1", 0.9, None), ("ok", "a2", 0.1, None)])
    assert [item.text for item in items] == ["ok"]


def test_dedup_label_merge_and_conflict():
    same = dedup_items([
        ("x", "a1", 0.1, Label.NON_VIOLATING),
        ("x", "a2", 0.2, Label.NON_VIOLATING),
    ])
    assert same[0].label is Label.NON_VIOLATING
    assert same[0].conflicting_labels == ()

    conflict = dedup_items([
        ("x", "a1", 0.1, Label.NON_VIOLATING),
        ("x", "a2", 0.2, Label.VIOLATING),
    ])
    assert conflict[0].label is None
    assert set(conflict[0].conflicting_labels) == {Label.VIOLATING, Label.NON_VIOLATING}


def test_dedup_against_group_by_oracle():
    rng = random.Random(21)
    for _ in range(50):
        tuples = random_tuples(rng, rng.randint(0, 40))
        got = dedup_items(tuples)

        # oracle: plain dict group-by over the same normalization contract
        groups = defaultdict(list)
        order = []
        for text, ad_id, score, _ in tuples:
            key = normalize_text(text)
            if not key:
                continue
            if key not in groups:
                order.append(key)
            groups[key].append((ad_id, score))

        assert [item.text for item in got] == order
        for item in got:
            members = groups[item.text]
            assert item.occurrence_count == len(members)
            assert item.baseline_score == max(score for _, score in members)


def test_dedup_idempotent_and_conserves_occurrences():
    rng = random.Random(22)
    for _ in range(50):
        tuples = random_tuples(rng, rng.randint(0, 60))
        out = dedup_items(tuples)
        nonempty = sum(1 for text, *_ in tuples if normalize_text(text))
        assert sum(item.occurrence_count for item in out) == nonempty
        assert dedup_items(replay(out)) == out


# -- build_profile -------------------------------------------------------------


def quotas(fp=2, labeled=2, relevant=2, max_items=6):
    return BudgetConfig(
        max_items=max_items,
        known_false_positive_quota=fp,
        already_labeled_quota=labeled,
        most_relevant_quota=relevant,
    )


def test_profile_of_zero_ads():
    profile = build_profile(make_advertiser("a"), [], quotas())
    assert profile.total_items == 0
    assert profile.targeting_terms == [] and profile.domains == []
    assert profile.dedup_stats.input_items == 0


def test_bucket_assignment_hand_enumerated():
    ads = [
        make_ad("k1", "a", text="known fp ad", score=0.9,
                label=Label.NON_VIOLATING, label_source=LabelSource.KNOWN_FALSE_POSITIVE),
        make_ad("l1", "a", text="labeled ad", score=0.3, label=Label.VIOLATING),
        make_ad("u1", "a", text="unlabeled high", score=0.9),
        make_ad("u2", "a", text="unlabeled mid", score=0.4),
        make_ad("u3", "a", text="unlabeled low", score=0.1),
    ]
    profile = build_profile(make_advertiser("a"), ads, quotas())
    assert [i.text for i in profile.bucket(BucketKind.KNOWN_FALSE_POSITIVE).items] == ["known fp ad"]
    assert [i.text for i in profile.bucket(BucketKind.ALREADY_LABELED).items] == ["labeled ad"]
    assert [i.text for i in profile.bucket(BucketKind.MOST_RELEVANT).items] == [
        "unlabeled high",
        "unlabeled mid",
    ]


def test_duplicate_across_buckets_goes_to_labeled():
    ads = [
        make_ad("u1", "a", text="Same Creative", score=0.8),
        make_ad("l1", "a", text="same  creative", score=0.2, label=Label.NON_VIOLATING),
    ]
    profile = build_profile(make_advertiser("a"), ads, quotas())
    labeled = profile.bucket(BucketKind.ALREADY_LABELED).items
    assert len(labeled) == 1
    assert labeled[0].occurrence_count == 2
    assert sorted(labeled[0].source_ad_ids) == ["l1", "u1"]
    assert profile.bucket(BucketKind.MOST_RELEVANT).items == []


def test_label_conflict_lands_in_labeled_with_annotation():
    ads = [
        make_ad("k1", "a", text="dup", score=0.9,
                label=Label.NON_VIOLATING, label_source=LabelSource.KNOWN_FALSE_POSITIVE),
        make_ad("l1", "a", text="dup", score=0.2, label=Label.VIOLATING),
    ]
    profile = build_profile(make_advertiser("a"), ads, quotas())
    assert profile.bucket(BucketKind.KNOWN_FALSE_POSITIVE).items == []
    labeled = profile.bucket(BucketKind.ALREADY_LABELED).items
    assert len(labeled) == 1
    assert labeled[0].conflicting_labels != ()


def test_quota_spill_only_to_most_relevant():
    ads = [make_ad(f"u{i}", "a", text=f"creative {i}", score=i / 10) for i in range(8)]
    # headroom (max_items - quota sum) = 4 goes to MOST_RELEVANT only
    profile = build_profile(
        make_advertiser("a"), ads, quotas(fp=2, labeled=2, relevant=2, max_items=10)
    )
    assert len(profile.bucket(BucketKind.MOST_RELEVANT).items) == 6

    # unused evidence quota does NOT grow MOST_RELEVANT past its own share
    tight = build_profile(
        make_advertiser("a"), ads, quotas(fp=2, labeled=2, relevant=2, max_items=6)
    )
    assert len(tight.bucket(BucketKind.MOST_RELEVANT).items) == 2


def test_budget_error_when_quotas_exceed_max():
    with pytest.raises(BudgetError):
        build_profile(make_advertiser("a"), [], quotas(fp=3, labeled=3, relevant=3, max_items=6))


def test_mixed_advertiser_rejected():
    with pytest.raises(MixedAdvertiser):
        build_profile(make_advertiser("a"), [make_ad("x", "other")], quotas())


def test_bucket_partition_property():
    rng = random.Random(23)
    for _ in range(30):
        ads = []
        for i in range(rng.randint(0, 30)):
            roll = rng.random()
            label = None
            source = None
            score = rng.random()
            if roll < 0.2:
                label, source, score = Label.NON_VIOLATING, LabelSource.KNOWN_FALSE_POSITIVE, max(score, 0.5)
            elif roll < 0.4:
                label = rng.choice([Label.VIOLATING, Label.NON_VIOLATING])
            text = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 3)))
            ads.append(make_ad(f"ad{i}", "a", text=text, score=score,
                               flagged=score >= 0.5, label=label, label_source=source))
        profile = build_profile(make_advertiser("a"), ads, quotas(10, 10, 10, 30))
        texts = [item.text for bucket in profile.buckets.values() for item in bucket.items]
        assert len(texts) == len(set(texts))
        assert profile.total_items <= 30
        assert profile.dedup_stats.output_items <= profile.dedup_stats.input_items


def test_permutation_invariance():
    rng = random.Random(24)
    ads = [
        make_ad(f"ad{i:02d}", "a",
                text=" ".join(rng.choice(WORDS) for _ in range(2)),
                score=round(rng.random(), 2),
                label=rng.choice([None, Label.NON_VIOLATING]))
        for i in range(20)
    ]
    baseline = build_profile(make_advertiser("a"), ads, quotas(3, 3, 3, 9))
    for _ in range(5):
        shuffled = ads[:]
        rng.shuffle(shuffled)
        assert build_profile(make_advertiser("a"), shuffled, quotas(3, 3, 3, 9)) == baseline


def test_terms_and_domains_unioned_sorted():
    ads = [
        make_ad("x1", "a", text="one", terms=("b", "a"), domain="z.example"),
        make_ad("x2", "a", text="two", terms=("a", "c"), domain="a.example"),
    ]
    profile = build_profile(make_advertiser("a"), ads, quotas())
    assert profile.targeting_terms == ["a", "b", "c"]
    assert profile.domains == ["a.example", "z.example"]
