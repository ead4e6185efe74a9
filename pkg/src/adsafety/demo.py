"""Self-contained demo workspace: a 12-advertiser synthetic corpus, a policy,
a prompt template, and a MOCK-backend config.

The corpus is constructed so the keyword mock produces a known mix of correct
calls and errors: two good advertisers whose ads merely mention the lexicon
term (filter-software vendors), and one bad advertiser that avoids it. Used by
the README quickstart, the end-to-end tests, and the workbench seeding script.
"""

from __future__ import annotations

import json
from pathlib import Path

DEMO_SALT = "demo-v11"
DEMO_LEXICON = ["nsfw"]

_ADVERTISERS = [
    {
        "advertiser_id": "adv01",
        "display_name": "Bright Bloom Florists",
        "knowledge_snippets": ["Family-owned florist operating since 2005"],
        "advertiser_label": "NON_VIOLATING",
    },
    {
        "advertiser_id": "adv02",
        "display_name": "Peak Trail Outfitters",
        "knowledge_snippets": ["Outdoor equipment retailer with 40 stores"],
        "advertiser_label": "NON_VIOLATING",
    },
    {
        "advertiser_id": "adv03",
        "display_name": "Nimbus Yoga Studio",
        "knowledge_snippets": [],
        "advertiser_label": "NON_VIOLATING",
    },
    {
        "advertiser_id": "adv04",
        "display_name": "Harvest Table Meals",
        "knowledge_snippets": ["Meal kit delivery service"],
        "advertiser_label": "NON_VIOLATING",
    },
    {
        "advertiser_id": "adv05",
        "display_name": "Casa Verde Realty",
        "knowledge_snippets": [],
        "advertiser_label": "NON_VIOLATING",
    },
    {
        "advertiser_id": "adv06",
        "display_name": "SafeScreen Software",
        "knowledge_snippets": ["Makes parental-control and content-filtering tools"],
        "advertiser_label": "NON_VIOLATING",
    },
    {
        "advertiser_id": "adv07",
        "display_name": "ClearLens Moderation API",
        "knowledge_snippets": ["B2B content moderation API vendor"],
        "advertiser_label": "NON_VIOLATING",
    },
    {
        "advertiser_id": "adv08",
        "display_name": "Velvet After Dark",
        "knowledge_snippets": [],
        "advertiser_label": "VIOLATING",
    },
    {
        "advertiser_id": "adv09",
        "display_name": "Crimson Rooms",
        "knowledge_snippets": [],
        "advertiser_label": "VIOLATING",
    },
    {
        "advertiser_id": "adv10",
        "display_name": "Scarlet Studio Art",
        "knowledge_snippets": [],
        "advertiser_label": "VIOLATING",
    },
    {
        "advertiser_id": "adv11",
        "display_name": "Midnight Companions",
        "knowledge_snippets": [],
        "advertiser_label": "VIOLATING",
    },
    {
        "advertiser_id": "adv12",
        "display_name": "Stellar Tutoring",
        "knowledge_snippets": ["Online tutoring marketplace"],
        "advertiser_label": "NON_VIOLATING",
    },
]

_ADS = [
    # adv01: good; one baseline over-flag confirmed as a false positive.
    {"ad_id": "a0101", "advertiser_id": "adv01", "creative_text": "Romantic red roses for your anniversary night", "baseline_score": 0.82, "baseline_flagged": True, "label": "NON_VIOLATING", "label_source": "KNOWN_FALSE_POSITIVE", "targeting_terms": ["flowers", "anniversary"], "destination_domain": "brightbloom.example"},
    {"ad_id": "a0102", "advertiser_id": "adv01", "creative_text": "Same-day flower delivery across the city", "baseline_score": 0.1, "targeting_terms": ["flower delivery"], "destination_domain": "brightbloom.example"},
    {"ad_id": "a0103", "advertiser_id": "adv01", "creative_text": "Wedding bouquets crafted by local florists", "baseline_score": 0.2, "destination_domain": "brightbloom.example"},
    # adv02: good; one human-labeled ad.
    {"ad_id": "a0201", "advertiser_id": "adv02", "creative_text": "Conquer the wild backcountry this weekend", "baseline_score": 0.7, "baseline_flagged": True, "label": "NON_VIOLATING", "label_source": "HUMAN", "targeting_terms": ["hiking"], "destination_domain": "peaktrail.example"},
    {"ad_id": "a0202", "advertiser_id": "adv02", "creative_text": "Waterproof boots built for every trail", "baseline_score": 0.15, "destination_domain": "peaktrail.example"},
    # adv03: good, one borderline flag.
    {"ad_id": "a0301", "advertiser_id": "adv03", "creative_text": "Hot yoga sessions every evening downtown", "baseline_score": 0.55, "targeting_terms": ["yoga"], "destination_domain": "nimbusyoga.example"},
    {"ad_id": "a0302", "advertiser_id": "adv03", "creative_text": "Beginner friendly morning flow classes", "baseline_score": 0.05, "destination_domain": "nimbusyoga.example"},
    # adv04: good.
    {"ad_id": "a0401", "advertiser_id": "adv04", "creative_text": "Fresh dinner kits delivered to your door", "baseline_score": 0.08, "targeting_terms": ["meal kits"], "destination_domain": "harvesttable.example"},
    {"ad_id": "a0402", "advertiser_id": "adv04", "creative_text": "Family recipes ready in twenty minutes", "baseline_score": 0.5, "destination_domain": "harvesttable.example"},
    # adv05: good.
    {"ad_id": "a0501", "advertiser_id": "adv05", "creative_text": "Find your dream home with local experts", "baseline_score": 0.12, "targeting_terms": ["real estate"], "destination_domain": "casaverde.example"},
    {"ad_id": "a0502", "advertiser_id": "adv05", "creative_text": "Open house tours every Saturday", "baseline_score": 0.55, "destination_domain": "casaverde.example"},
    # adv06: good, but its ads mention the lexicon keyword (filter software).
    {"ad_id": "a0601", "advertiser_id": "adv06", "creative_text": "Parental controls that filter nsfw content in real time", "baseline_score": 0.9, "baseline_flagged": True, "targeting_terms": ["parental controls"], "destination_domain": "safescreen.example"},
    {"ad_id": "a0602", "advertiser_id": "adv06", "creative_text": "Keep every family device safe online", "baseline_score": 0.2, "destination_domain": "safescreen.example"},
    # adv07: good, same keyword trap.
    {"ad_id": "a0701", "advertiser_id": "adv07", "creative_text": "Our API detects nsfw images before they reach your users", "baseline_score": 0.88, "baseline_flagged": True, "targeting_terms": ["moderation api"], "destination_domain": "clearlens.example"},
    {"ad_id": "a0702", "advertiser_id": "adv07", "creative_text": "Trust and safety tooling for growing platforms", "baseline_score": 0.1, "destination_domain": "clearlens.example"},
    # adv08-adv10: violating, keyword present.
    {"ad_id": "a0801", "advertiser_id": "adv08", "creative_text": "Uncensored nsfw chat rooms open all night", "baseline_score": 0.95, "baseline_flagged": True, "destination_domain": "velvetafterdark.example"},
    {"ad_id": "a0802", "advertiser_id": "adv08", "creative_text": "Join the most daring community online", "baseline_score": 0.6, "destination_domain": "velvetafterdark.example"},
    {"ad_id": "a0901", "advertiser_id": "adv09", "creative_text": "Premium nsfw video access, first week free", "baseline_score": 0.97, "baseline_flagged": True, "destination_domain": "crimsonrooms.example"},
    {"ad_id": "a1001", "advertiser_id": "adv10", "creative_text": "Commission explicit nsfw art from top artists", "baseline_score": 0.93, "baseline_flagged": True, "destination_domain": "scarletstudio.example"},
    {"ad_id": "a1002", "advertiser_id": "adv10", "creative_text": "Gallery drops every Friday at midnight", "baseline_score": 0.4, "destination_domain": "scarletstudio.example"},
    # adv11: violating but avoids the keyword (evasion).
    {"ad_id": "a1101", "advertiser_id": "adv11", "creative_text": "Meet open-minded companions for discreet late-night encounters", "baseline_score": 0.85, "baseline_flagged": True, "targeting_terms": ["companionship"], "destination_domain": "midnightcompanions.example"},
    {"ad_id": "a1102", "advertiser_id": "adv11", "creative_text": "Book a private evening you will not forget", "baseline_score": 0.75, "baseline_flagged": True, "destination_domain": "midnightcompanions.example"},
    # adv12: good.
    {"ad_id": "a1201", "advertiser_id": "adv12", "creative_text": "Ace the exam with one-on-one tutoring", "baseline_score": 0.03, "targeting_terms": ["tutoring"], "destination_domain": "stellartutoring.example"},
    {"ad_id": "a1202", "advertiser_id": "adv12", "creative_text": "Math and science help from vetted teachers", "baseline_score": 0.07, "destination_domain": "stellartutoring.example"},
]

_POLICY = {
    "policy_id": "nfs-v1",
    "name": "Non-Family Safe",
    "description": (
        "This policy restricts advertisers whose business is sexually explicit or "
        "adult-oriented entertainment: explicit video or chat services, adult "
        "companionship or escort services, and sexually suggestive offerings aimed "
        "at late-night audiences. The advertiser's overall business matters: "
        "merely mentioning restricted themes (for example a safety product that "
        "blocks such material) is not itself a violation."
    ),
    "in_scope_examples": [
        "Explicit adult video subscriptions",
        "Adult companionship or escort services",
        "Sexually suggestive live chat services",
    ],
    "out_of_scope_examples": [
        "Florists selling romantic bouquets",
        "Content-filtering and parental-control software",
        "Fitness, wellness, and yoga studios",
    ],
}

_TEMPLATE = """\
# template: nfs-advertiser r1
You are a content policy specialist reviewing an ADVERTISER (not a single ad).

{{POLICY_DESCRIPTION}}

In scope for this policy:
{{IN_SCOPE_EXAMPLES}}

Out of scope for this policy:
{{OUT_OF_SCOPE_EXAMPLES}}

Advertiser content profile:
{{ADVERTISER_PROFILE}}

Your tasks:
{{TASK_INSTRUCTIONS}}

{{OUTPUT_FORMAT}}
"""


def build_demo_workspace(root: str | Path) -> dict[str, Path]:
    """Write the demo corpus, policy, template, and config under `root`.
    Returns the paths keyed by role (config, ads, advertisers, ...)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "ads": root / "ads.jsonl",
        "advertisers": root / "advertisers.jsonl",
        "policy": root / "policy.json",
        "template": root / "nfs-advertiser.r1.txt",
        "config": root / "config.json",
        "store_dir": root / "store",
    }
    with open(paths["ads"], "w", encoding="utf-8") as fh:
        for ad in _ADS:
            fh.write(json.dumps(ad, ensure_ascii=False) + "\n")
    with open(paths["advertisers"], "w", encoding="utf-8") as fh:
        for advertiser in _ADVERTISERS:
            fh.write(json.dumps(advertiser, ensure_ascii=False) + "\n")
    paths["policy"].write_text(json.dumps(_POLICY, indent=2), encoding="utf-8")
    paths["template"].write_text(_TEMPLATE, encoding="utf-8")
    config = {
        "paths": {
            "ads": "ads.jsonl",
            "advertisers": "advertisers.jsonl",
            "store_dir": "store",
            "template": "nfs-advertiser.r1.txt",
            "policy": "policy.json",
        },
        "ingest": {"strict": False, "flag_threshold": 0.5},
        "funnel": {"min_flagged": 0, "top_k": None, "score_floor": 0.0, "fp_boost": 0.5},
        "splits": {"ratios": [0.4, 0.4, 0.2], "salt": DEMO_SALT},
        "backend": {
            "kind": "MOCK",
            "mock": {"lexicon": DEMO_LEXICON, "decision_if_match": "VIOLATING"},
        },
        "workers": 4,
    }
    paths["config"].write_text(json.dumps(config, indent=2), encoding="utf-8")
    return paths


def main() -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Write the adsafety demo workspace.")
    parser.add_argument("root", help="directory to create the demo files in")
    args = parser.parse_args()
    paths = build_demo_workspace(args.root)
    for role, path in paths.items():
        print(f"{role}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
