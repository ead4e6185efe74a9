from __future__ import annotations

import random

import pytest

from adsafety.corpus import Label
from adsafety.evaluation import Split
from adsafety.store import RunStore, UnknownAdvertiser, UnknownRun
from adsafety.triage import (
    DEFAULT_CATEGORIES,
    DuplicateCategory,
    HoldoutViolation,
    RevisionGap,
    RevisionLedgerEntry,
    TriageAssignment,
    TriageCenter,
    UnknownCategory,
    promote_reviewer_labels,
)

from .conftest import eval_fixture_10, make_verdict


@pytest.fixture
def env(tmp_path):
    """Store with one completed run over the 10-advertiser eval fixture.
    b2 and b3 are HOLDOUT; everything else is tuning data."""
    store = RunStore(tmp_path / "store")
    verdicts, labels = eval_fixture_10()
    candidates = [advertiser_id for advertiser_id, _ in verdicts]
    run = store.create_run(
        template_id="tmpl",
        template_revision=1,
        policy_id="pol",
        candidates=candidates,
        backend_kind="MOCK",
    )
    for advertiser_id, verdict in verdicts:
        store.record_verdict(run.run_id, advertiser_id, verdict)
    store.finalize_run(run.run_id)

    holdout = {"b2", "b3"}
    splits = {a: (Split.HOLDOUT if a in holdout else Split.TUNE_A) for a in candidates}
    triage = TriageCenter(store, split_lookup=lambda a: splits.get(a, Split.TUNE_B))
    return store, triage, run.run_id, labels


def test_default_categories_seeded(env):
    _, triage, _, _ = env
    ids = triage.category_ids()
    assert {cid for cid, _ in DEFAULT_CATEGORIES} <= ids


def test_list_errors_matches_eval_fixture(env):
    _, triage, run_id, labels = env
    cases = triage.list_errors(run_id, labels)
    kinds = {(c.advertiser_id, c.kind) for c in cases}
    # same hand-enumerated fixture as eval: 1 fp (b1) + 2 fn (g6, g7)
    assert kinds == {("b1", "fp"), ("g6", "fn"), ("g7", "fn")}
    assert [c.advertiser_id for c in cases] == sorted(c.advertiser_id for c in cases)
    assert all(c.rationale for c in cases)


def test_list_errors_unknown_run(env):
    _, triage, _, labels = env
    with pytest.raises(UnknownRun):
        triage.list_errors("nope", labels)


def test_perfect_run_has_no_errors(tmp_path):
    store = RunStore(tmp_path / "store")
    labels = {"a": Label.NON_VIOLATING}
    run = store.create_run(
        template_id="t", template_revision=1, policy_id="p",
        candidates=["a"], backend_kind="MOCK",
    )
    store.record_verdict(run.run_id, "a", make_verdict("a", Label.NON_VIOLATING))
    triage = TriageCenter(store, split_lookup=lambda _a: Split.TUNE_A)
    assert triage.list_errors(run.run_id, labels) == []


def test_bin_and_retrieve(env):
    _, triage, run_id, _ = env
    assignment_id = triage.bin_error(
        TriageAssignment(run_id=run_id, advertiser_id="g6",
                         category_id="profile-too-sparse", reviewer_note="thin profile")
    )
    assert assignment_id
    current = triage.current_assignments(run_id)
    assert current["g6"].category_id == "profile-too-sparse"
    assert current["g6"].reviewer_note == "thin profile"


def test_holdout_binning_rejected(env):
    _, triage, run_id, _ = env
    with pytest.raises(HoldoutViolation):
        triage.bin_error(
            TriageAssignment(run_id=run_id, advertiser_id="b2",
                             category_id="profile-too-sparse")
        )
    assert triage.current_assignments(run_id) == {}


def test_rebinning_latest_wins_history_retained(env):
    _, triage, run_id, _ = env
    triage.bin_error(TriageAssignment(run_id=run_id, advertiser_id="g6",
                                      category_id="profile-too-sparse"))
    triage.bin_error(TriageAssignment(run_id=run_id, advertiser_id="g6",
                                      category_id="policy-scope-confusion"))
    history = triage.assignment_history(run_id, "g6")
    assert len(history) == 2
    assert triage.current_assignments(run_id)["g6"].category_id == "policy-scope-confusion"


def test_bin_unknown_entities(env):
    _, triage, run_id, _ = env
    with pytest.raises(UnknownRun):
        triage.bin_error(TriageAssignment(run_id="nope", advertiser_id="g6",
                                          category_id="profile-too-sparse"))
    with pytest.raises(UnknownCategory):
        triage.bin_error(TriageAssignment(run_id=run_id, advertiser_id="g6",
                                          category_id="nope"))
    with pytest.raises(UnknownAdvertiser):
        triage.bin_error(TriageAssignment(run_id=run_id, advertiser_id="ghost",
                                          category_id="profile-too-sparse"))


def test_histogram_counts_and_rebin(env):
    _, triage, run_id, _ = env
    assert triage.category_histogram(run_id) == {}
    triage.bin_error(TriageAssignment(run_id=run_id, advertiser_id="g6",
                                      category_id="profile-too-sparse"))
    triage.bin_error(TriageAssignment(run_id=run_id, advertiser_id="g7",
                                      category_id="profile-too-sparse"))
    triage.bin_error(TriageAssignment(run_id=run_id, advertiser_id="b1",
                                      category_id="policy-scope-confusion"))
    assert triage.category_histogram(run_id) == {
        "profile-too-sparse": 2,
        "policy-scope-confusion": 1,
    }
    # re-bin one profile-too-sparse error into policy-scope-confusion
    triage.bin_error(TriageAssignment(run_id=run_id, advertiser_id="g6",
                                      category_id="policy-scope-confusion"))
    assert triage.category_histogram(run_id) == {
        "profile-too-sparse": 1,
        "policy-scope-confusion": 2,
    }
    # conservation: histogram total equals distinct advertisers binned
    assert sum(triage.category_histogram(run_id).values()) == 3


def test_category_crud(env):
    _, triage, _, _ = env
    category = triage.add_category("Missed disclaimers", "fine print not considered")
    assert category.category_id == "missed-disclaimers"
    with pytest.raises(DuplicateCategory):
        triage.add_category("Missed disclaimers")


def test_revision_ledger_flow(env):
    _, triage, _, _ = env
    first = RevisionLedgerEntry(
        template_id="tmpl", from_revision=1, to_revision=2,
        addressed_category_ids=["profile-too-sparse"], change_note="add profile detail",
    )
    assert triage.record_revision(first) == 0

    with pytest.raises(RevisionGap):
        triage.record_revision(RevisionLedgerEntry(
            template_id="tmpl", from_revision=1, to_revision=3,
            addressed_category_ids=["profile-too-sparse"],
        ))
    with pytest.raises(RevisionGap):
        # chain is at 2, cannot re-record 1 -> 2
        triage.record_revision(RevisionLedgerEntry(
            template_id="tmpl", from_revision=1, to_revision=2,
            addressed_category_ids=["profile-too-sparse"],
        ))
    with pytest.raises(UnknownCategory):
        triage.record_revision(RevisionLedgerEntry(
            template_id="tmpl", from_revision=2, to_revision=3,
            addressed_category_ids=["nope"],
        ))

    # the two-iteration workflow shape: 1 -> 2 -> 3
    triage.record_revision(RevisionLedgerEntry(
        template_id="tmpl", from_revision=2, to_revision=3,
        addressed_category_ids=["policy-scope-confusion"], change_note="tighten scope wording",
    ))
    chain = triage.revision_ledger("tmpl")
    assert [(e.from_revision, e.to_revision) for e in chain] == [(1, 2), (2, 3)]


def test_audit_clean_after_randomized_session(env):
    _, triage, run_id, _ = env
    rng = random.Random(61)
    tune_advertisers = [f"g{i}" for i in range(1, 8)] + ["b1"]
    categories = sorted(triage.category_ids())
    for _ in range(100):
        advertiser_id = rng.choice(tune_advertisers + ["b2", "b3"])
        try:
            triage.bin_error(TriageAssignment(
                run_id=run_id, advertiser_id=advertiser_id,
                category_id=rng.choice(categories),
            ))
        except HoldoutViolation:
            assert advertiser_id in {"b2", "b3"}
    assert triage.audit() == []


def test_promote_reviewer_labels_latest_wins(env):
    store, _, _, _ = env
    store.append_reviewer_label(
        {"advertiser_id": "g6", "label": "VIOLATING", "reviewer": "r1", "hints_were_shown": False}
    )
    store.append_reviewer_label(
        {"advertiser_id": "g6", "label": "NON_VIOLATING", "reviewer": "r2", "hints_were_shown": True}
    )
    assert promote_reviewer_labels(store) == {"g6": Label.NON_VIOLATING}
