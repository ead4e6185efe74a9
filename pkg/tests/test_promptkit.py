from __future__ import annotations

import random
import string

import pytest

from adsafety.corpus import Label
from adsafety.profiler import (
    BUCKET_PRIORITY,
    BucketKind,
    ContentProfile,
    DedupStats,
    ProfileBucket,
    ProfileItem,
)
from adsafety.promptkit import (
    BudgetImpossible,
    ParseError,
    PolicySpec,
    PromptBudget,
    TASK_INSTRUCTIONS_TEXT,
    TemplateInvalid,
    Verdict,
    load_template,
    parse_response,
    parse_template,
    render_prompt,
    verdict_from_dict,
    verdict_to_dict,
)

TEMPLATE_BODY = (
    "You review advertisers.\n"
    "{{POLICY_DESCRIPTION}}\n"
    "In scope:\n{{IN_SCOPE_EXAMPLES}}\n"
    "Out of scope:\n{{OUT_OF_SCOPE_EXAMPLES}}\n"
    "Profile:\n{{ADVERTISER_PROFILE}}\n"
    "Tasks:\n{{TASK_INSTRUCTIONS}}\n"
    "{{OUTPUT_FORMAT}}\n"
)


def template():
    return parse_template(TEMPLATE_BODY, "tmpl", 1)


def policy():
    return PolicySpec(
        policy_id="p1",
        name="Test Policy",
        description="Policy body text.",
        in_scope_examples=["bad thing one", "bad thing two"],
        out_of_scope_examples=["fine thing"],
    )


def item(text: str, score: float = 0.5) -> ProfileItem:
    return ProfileItem(text=text, source_ad_ids=[text], occurrence_count=1, baseline_score=score)


def profile(kfp=(), labeled=(), relevant=()) -> ContentProfile:
    buckets = {
        BucketKind.KNOWN_FALSE_POSITIVE: ProfileBucket(
            BucketKind.KNOWN_FALSE_POSITIVE, [item(t) for t in kfp]
        ),
        BucketKind.ALREADY_LABELED: ProfileBucket(
            BucketKind.ALREADY_LABELED, [item(t) for t in labeled]
        ),
        BucketKind.MOST_RELEVANT: ProfileBucket(
            BucketKind.MOST_RELEVANT, [item(t) for t in relevant]
        ),
    }
    n = len(kfp) + len(labeled) + len(relevant)
    return ContentProfile(
        advertiser_id="adv1",
        display_name="Adv One",
        buckets=buckets,
        targeting_terms=["alpha"],
        domains=["adv.example"],
        knowledge_snippets=["known fact"],
        dedup_stats=DedupStats(input_items=n, output_items=n),
    )


# -- templates -------------------------------------------------------------------


def test_template_header_round_trip(tmp_path):
    path = tmp_path / "tmpl.r3.txt"
    path.write_text("# template: mytmpl r3\n# extra comment\nBody {{TASK_INSTRUCTIONS}} {{ADVERTISER_PROFILE}}")
    loaded = load_template(path)
    assert loaded.template_id == "mytmpl"
    assert loaded.revision == 3
    assert loaded.sections[0].value.startswith("Body")


def test_template_missing_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("no header here")
    with pytest.raises(TemplateInvalid):
        load_template(path)


def test_template_validation_errors():
    with pytest.raises(TemplateInvalid, match="unknown placeholder"):
        parse_template("{{NOT_A_THING}} {{TASK_INSTRUCTIONS}} {{ADVERTISER_PROFILE}}", "t", 1)
    with pytest.raises(TemplateInvalid, match="twice"):
        parse_template(
            "{{TASK_INSTRUCTIONS}} {{TASK_INSTRUCTIONS}} {{ADVERTISER_PROFILE}}", "t", 1
        )
    with pytest.raises(TemplateInvalid, match="required"):
        parse_template("{{TASK_INSTRUCTIONS}} only", "t", 1)


# -- rendering -------------------------------------------------------------------


def test_render_is_byte_deterministic():
    p = profile(kfp=["one"], relevant=["two", "three"])
    first = render_prompt(template(), policy(), p, PromptBudget(10000))
    second = render_prompt(template(), policy(), p, PromptBudget(10000))
    assert first.text == second.text
    assert first.char_budget_used == len(first.text)
    assert not first.truncated


def test_render_contains_task_instructions_verbatim():
    rendered = render_prompt(template(), policy(), profile(relevant=["x"]), PromptBudget(10000))
    for line in TASK_INSTRUCTIONS_TEXT.splitlines():
        assert line in rendered.text


def test_budget_impossible():
    with pytest.raises(BudgetImpossible):
        render_prompt(template(), policy(), profile(), PromptBudget(max_chars=50))


def test_truncation_fits_exactly_seven_of_ten():
    tokens = [f"relevitem{i:02d}" for i in range(10)]
    full = profile(relevant=tokens)
    seven = profile(relevant=tokens[:7])
    # greedy-fill oracle: the budget that exactly fits the 7-item render
    budget = len(render_prompt(template(), policy(), seven, PromptBudget(10**6)).text)

    rendered = render_prompt(template(), policy(), full, PromptBudget(budget))
    assert rendered.truncated
    assert rendered.char_budget_used <= budget
    for token in tokens[:7]:
        assert token in rendered.text
    for token in tokens[7:]:
        assert token not in rendered.text

    # one char less forces a sixth-item fit
    tighter = render_prompt(template(), policy(), full, PromptBudget(budget - 1))
    assert tokens[6] not in tighter.text
    assert tokens[5] in tighter.text


def test_truncation_priority_never_drops_kfp_before_relevant():
    rng = random.Random(31)
    for _ in range(100):
        kfp = [f"kfpitem{i}" for i in range(rng.randint(0, 4))]
        labeled = [f"labitem{i}" for i in range(rng.randint(0, 4))]
        relevant = [f"relitem{i}" for i in range(rng.randint(0, 6))]
        p = profile(kfp=kfp, labeled=labeled, relevant=relevant)
        full_len = len(render_prompt(template(), policy(), p, PromptBudget(10**6)).text)
        min_len = len(render_prompt(template(), policy(), profile(), PromptBudget(10**6)).text)
        if full_len <= min_len:
            continue
        budget = rng.randint(min_len, full_len)
        rendered = render_prompt(template(), policy(), p, PromptBudget(budget))
        kfp_dropped = any(t not in rendered.text for t in kfp)
        labeled_dropped = any(t not in rendered.text for t in labeled)
        relevant_present = any(t in rendered.text for t in relevant)
        if kfp_dropped or labeled_dropped:
            assert not relevant_present
        if kfp_dropped:
            assert not any(t in rendered.text for t in labeled)


# -- parsing ---------------------------------------------------------------------


GOLDEN = (
    "SUMMARY: A retailer of hiking boots with outdoorsy ads.\n"
    "PRODUCTS: Hiking boots and trail gear.\n"
    "DECISION: NON_VIOLATING\n"
    "RATIONALE: Nothing here targets a restricted audience.\n"
)


def test_parse_golden_fixture():
    verdict = parse_response(GOLDEN, advertiser_id="adv1", template_revision=2)
    assert isinstance(verdict, Verdict)
    assert verdict.decision is Label.NON_VIOLATING
    assert verdict.advertiser_summary.startswith("A retailer")
    assert verdict.products_services == "Hiking boots and trail gear."
    assert verdict.advertiser_id == "adv1"
    assert verdict.template_revision == 2


def test_parse_lowercase_decision():
    raw = "summary: s\nproducts: p\ndecision: violating\nrationale: r"
    verdict = parse_response(raw)
    assert isinstance(verdict, Verdict)
    assert verdict.decision is Label.VIOLATING


def test_parse_decision_variants():
    for text, expected in [
        ("Non-Violating", Label.NON_VIOLATING),
        ("non violating.", Label.NON_VIOLATING),
        ("VIOLATING", Label.VIOLATING),
    ]:
        raw = f"SUMMARY: s\nPRODUCTS: p\nDECISION: {text}\nRATIONALE: r"
        verdict = parse_response(raw)
        assert isinstance(verdict, Verdict)
        assert verdict.decision is expected


def test_parse_missing_section():
    raw = "SUMMARY: s\nPRODUCTS: p\nRATIONALE: r"
    err = parse_response(raw)
    assert isinstance(err, ParseError)
    assert err.kind == "missing_section"
    assert "DECISION" in err.detail
    assert err.raw == raw


def test_parse_empty_section_counts_as_missing():
    raw = "SUMMARY:\nPRODUCTS: p\nDECISION: VIOLATING\nRATIONALE: r"
    err = parse_response(raw)
    assert isinstance(err, ParseError)
    assert err.kind == "missing_section"
    assert "SUMMARY" in err.detail


def test_parse_ambiguous_decision():
    raw = "SUMMARY: s\nPRODUCTS: p\nDECISION: maybe bad\nRATIONALE: r"
    err = parse_response(raw)
    assert isinstance(err, ParseError)
    assert err.kind == "ambiguous_decision"


def test_parse_empty_response():
    for raw in ("", "   \n  "):
        err = parse_response(raw)
        assert isinstance(err, ParseError)
        assert err.kind == "empty_response"


def test_parse_is_total_on_fuzz():
    rng = random.Random(32)
    fragments = [
        "SUMMARY:", "PRODUCTS:", "DECISION:", "RATIONALE:",
        "VIOLATING", "NON_VIOLATING", "\n", " ", "junk", "decision: perhaps",
    ]
    for _ in range(300):
        n = rng.randint(0, 12)
        raw = "".join(
            rng.choice(fragments) if rng.random() < 0.6
            else "".join(rng.choice(string.printable) for _ in range(rng.randint(0, 8)))
            for _ in range(n)
        )
        result = parse_response(raw)
        assert isinstance(result, (Verdict, ParseError))
        if isinstance(result, ParseError):
            assert result.kind in {"missing_section", "ambiguous_decision", "empty_response"}
            assert result.raw == raw
        else:
            assert result.advertiser_summary and result.products_services


def test_verdict_serialization_round_trip():
    verdict = parse_response(GOLDEN, advertiser_id="a", template_revision=3)
    assert verdict_from_dict(verdict_to_dict(verdict)) == verdict
