"""Advertiser-level content policy classification.

Pipeline: ingest an ad corpus, funnel advertisers worth reviewing, build
deduplicated content profiles, classify them through an LLM backend (or the
deterministic mock), evaluate with good-advertiser-positive metrics, and run
the prompt-tuning triage loop behind an HTTP review service.
"""

__version__ = "0.1.0"
