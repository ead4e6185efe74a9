"""End-to-end pipeline: ingest -> select -> profile -> render -> classify ->
record -> finalize -> evaluate.

Runs are content-addressed and resumable: re-running the same configuration
opens the existing run and only asks the backend about advertisers without a
recorded outcome. Backend errors abort the run (status FAILED) with the stage
attributed, leaving recorded outcomes in place for a later resume.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from . import corpus as corpus_mod
from . import funnel as funnel_mod
from .config import PipelineConfig
from .errors import AdSafetyError
from .evaluation import EvalReport, Split, collect_labels, compute_metrics, split_for
from .gateway import BackendFailure, LlmGateway
from .profiler import build_profile, profile_to_dict
from .promptkit import load_policy, load_template, parse_response, render_prompt
from .store import RunRecord, RunStatus, RunStore

logger = logging.getLogger(__name__)


class StageError(AdSafetyError):
    """Wraps a module error with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.code = getattr(cause, "code", "StageError")


@dataclass
class PipelineResult:
    run_id: str
    status: RunStatus
    report: EvalReport | None
    candidates: list[str]
    resumed_outcomes: int


def _stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except AdSafetyError as exc:
        raise StageError(stage, exc) from exc
    except OSError as exc:
        raise StageError(stage, exc) from exc


def run_pipeline(
    config: PipelineConfig,
    split: Split | None = None,
    candidates: list[str] | None = None,
    gateway: object | None = None,
) -> PipelineResult:
    """Execute one classification run. `candidates` overrides funnel selection
    (the split restriction still applies); `gateway` overrides the configured
    backend, mainly for fault injection in tests."""
    corpus, _ = _stage(
        "ingest", corpus_mod.load_corpus, config.paths.ads, config.paths.advertisers, config.ingest
    )
    labels = _stage("ingest", collect_labels, corpus, config.paths.labels)
    template = _stage("config", load_template, config.paths.template)
    policy = _stage("config", load_policy, config.paths.policy)

    if candidates is None:
        candidates = _stage("select", funnel_mod.select_candidates, corpus, config.funnel)
    unknown = [c for c in candidates if c not in corpus.advertisers]
    if unknown:
        raise StageError(
            "select", AdSafetyError(f"candidates not in corpus: {unknown}")
        )
    if split is not None:
        candidates = [
            c
            for c in candidates
            if split_for(c, config.splits.ratios, config.splits.salt) is split
        ]

    profiles = {
        advertiser_id: _stage(
            "profile",
            build_profile,
            corpus.advertisers[advertiser_id],
            corpus.ads_for(advertiser_id),
            config.budget,
        )
        for advertiser_id in candidates
    }
    prompts = {
        advertiser_id: _stage(
            "render", render_prompt, template, policy, profiles[advertiser_id], config.prompt
        )
        for advertiser_id in candidates
    }

    store = RunStore(config.paths.store_dir)
    run = store.create_run(
        template_id=template.template_id,
        template_revision=template.revision,
        policy_id=policy.policy_id,
        candidates=candidates,
        backend_kind=config.backend.kind.value,
        template_text=Path(config.paths.template).read_text(encoding="utf-8"),
        split=split.value if split else None,
    )

    store.save_profiles(
        run.run_id, [profile_to_dict(profiles[advertiser_id]) for advertiser_id in candidates]
    )
    resumed = 0
    if run.status is not RunStatus.COMPLETE:
        store.resume_run(run.run_id)
        recorded = store.recorded_advertisers(run.run_id)
        resumed = len(recorded)
        pending = [c for c in candidates if c not in recorded]
        if pending:
            if gateway is None:
                gateway = _stage("classify", LlmGateway, config.backend)
            _classify(store, run, pending, prompts, template.revision, gateway, config.workers)
        run = _stage("classify", store.finalize_run, run.run_id)

    report = None
    if all(c in labels for c in candidates):
        outcomes = store.read_outcomes(run.run_id)
        verdicts = [
            (advertiser_id, outcomes[advertiser_id])
            for advertiser_id in candidates
            if not isinstance(outcomes[advertiser_id], BackendFailure)
        ]
        report = _stage(
            "eval",
            compute_metrics,
            verdicts,
            labels,
            run_id=run.run_id,
            split=split,
            template_revision=template.revision,
        )
    else:
        logger.info(
            "run %s: skipping evaluation, not all candidates have ground-truth labels",
            run.run_id,
        )

    return PipelineResult(
        run_id=run.run_id,
        status=run.status,
        report=report,
        candidates=list(candidates),
        resumed_outcomes=resumed,
    )


def _classify(
    store: RunStore,
    run: RunRecord,
    pending: list[str],
    prompts: dict,
    template_revision: int,
    gateway,
    workers: int,
) -> None:
    """Bounded-parallel backend calls; the main thread is the only writer."""

    def call(advertiser_id: str):
        raw = gateway.complete(prompts[advertiser_id])
        return advertiser_id, parse_response(
            raw, advertiser_id=advertiser_id, template_revision=template_revision
        )

    max_workers = max(1, min(workers, len(pending)))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(call, advertiser_id) for advertiser_id in pending]
        try:
            # Record each outcome as soon as it lands so an interrupted run
            # keeps everything already answered.
            for future in as_completed(futures):
                advertiser_id, outcome = future.result()
                store.record_verdict(run.run_id, advertiser_id, outcome)
        except Exception as exc:
            for future in futures:
                future.cancel()
            store.mark_failed(run.run_id, reason=str(exc))
            if isinstance(exc, AdSafetyError):
                raise StageError("classify", exc) from exc
            raise
