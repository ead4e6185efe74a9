"""HTTP API over the store, evaluation, and triage modules.

Every endpoint is a thin adapter over a module call: identical inputs through
the API and through direct module calls yield identical domain results. All
bodies and responses are JSON, and error bodies always carry the machine code
of the underlying module error plus a human message.

Hint-exposure logging: verdict reads accept ``?hints=shown|hidden`` and the
exposure is recorded; label submissions carry ``hints_were_shown`` so reviewer
performance with and without hints can be analyzed downstream.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import uvicorn
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import Corpus, Label, SchemaError
from .errors import AdSafetyError
from .evaluation import Split, compute_metrics, report_to_dict
from .gateway import BackendFailure
from .profiler import BudgetConfig, build_profile, profile_to_dict
from .promptkit import ParseError, Verdict
from .store import RunStore, UnknownAdvertiser
from .triage import RevisionLedgerEntry, TriageAssignment, TriageCenter

# Module error code -> HTTP status. Every AdSafetyError maps to exactly one.
ERROR_STATUS = {
    "UnknownRun": 404,
    "UnknownAdvertiser": 404,
    "UnknownCategory": 404,
    "HoldoutViolation": 409,
    "DuplicateConflict": 409,
    "DuplicateCategory": 409,
    "RevisionGap": 409,
    "IncomparableRuns": 409,
    "MissingLabel": 409,
    "RunNotRunning": 409,
    "IncompleteRun": 409,
    "SchemaError": 400,
    "ReferentialError": 400,
    "BadRatios": 400,
    "ConfigError": 400,
    "BudgetError": 400,
    "TemplateInvalid": 400,
    "PolicyInvalid": 400,
}


@dataclass
class ServiceContext:
    store: RunStore
    corpus: Corpus
    budget: BudgetConfig
    labels: dict[str, Label]
    split_lookup: Callable[[str], Split]
    triage: TriageCenter
    auth_token_env_var: str | None = None
    # Directory with the built review workbench (index.html + dist/); when
    # set, it is served from / so the UI and API share an origin.
    workbench_dir: str | None = None


class LabelSubmission(BaseModel):
    advertiser_id: str
    label: str
    reviewer: str
    hints_were_shown: bool


class CategorySubmission(BaseModel):
    title: str
    description: str = ""


class AssignmentSubmission(BaseModel):
    run_id: str
    advertiser_id: str
    category_id: str
    note: str = ""


class RevisionSubmission(BaseModel):
    template_id: str
    from_revision: int
    addressed_category_ids: list[str]
    change_note: str = ""


def _verdict_summary(outcome) -> dict:
    if isinstance(outcome, Verdict):
        return {
            "kind": "verdict",
            "decision": outcome.decision.value,
            "advertiser_summary": outcome.advertiser_summary,
            "products_services": outcome.products_services,
            "rationale": outcome.rationale,
            "template_revision": outcome.template_revision,
        }
    if isinstance(outcome, ParseError):
        return {"kind": "parse_error", "error": outcome.kind, "detail": outcome.detail}
    if isinstance(outcome, BackendFailure):
        return {"kind": "backend_error", "code": outcome.code, "message": outcome.message}
    return {"kind": "unknown"}


def create_app(ctx: ServiceContext) -> FastAPI:
    app = FastAPI(title="adsafety review service")

    @app.exception_handler(AdSafetyError)
    async def domain_error_handler(_request: Request, exc: AdSafetyError):
        status = ERROR_STATUS.get(exc.code, 500)
        return JSONResponse(
            status_code=status, content={"code": exc.code, "message": str(exc)}
        )

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(_request: Request, exc: RequestValidationError):
        # keep the code+message error body contract for malformed requests too
        return JSONResponse(
            status_code=422,
            content={"code": "ValidationError", "message": str(exc.errors())},
        )

    @app.middleware("http")
    async def enforce_json_and_auth(request: Request, call_next):
        if ctx.auth_token_env_var:
            expected = os.environ.get(ctx.auth_token_env_var)
            if expected:
                header = request.headers.get("authorization", "")
                if header != f"Bearer {expected}":
                    return JSONResponse(
                        status_code=401,
                        content={"code": "Unauthorized", "message": "missing or bad bearer token"},
                    )
        if request.method == "POST":
            content_type = request.headers.get("content-type", "")
            if "application/json" not in content_type:
                return JSONResponse(
                    status_code=415,
                    content={
                        "code": "UnsupportedMediaType",
                        "message": "POST bodies must be application/json",
                    },
                )
        return await call_next(request)

    # -- runs -------------------------------------------------------------------

    @app.get("/runs")
    def list_runs(limit: int = Query(100, ge=1), offset: int = Query(0, ge=0)):
        records = ctx.store.list_runs()
        return [
            {
                "run_id": r.run_id,
                "status": r.status.value,
                "template_id": r.template_id,
                "template_revision": r.template_revision,
                "policy_id": r.policy_id,
                "backend_kind": r.backend_kind,
                "candidate_count": len(r.candidates),
                "started_at": r.started_at,
                "finished_at": r.finished_at,
            }
            for r in records[offset : offset + limit]
        ]

    @app.get("/runs/{run_id}/report")
    def run_report(run_id: str):
        run = ctx.store.open_run(run_id)
        outcomes = ctx.store.read_outcomes(run_id)
        verdicts = [
            (advertiser_id, outcome)
            for advertiser_id, outcome in sorted(outcomes.items())
            if not isinstance(outcome, BackendFailure)
        ]
        report = compute_metrics(
            verdicts,
            ctx.labels,
            run_id=run_id,
            template_revision=run.template_revision,
        )
        return report_to_dict(report)

    @app.get("/runs/{run_id}/errors")
    def run_errors(run_id: str, limit: int = Query(500, ge=1), offset: int = Query(0, ge=0)):
        cases = ctx.triage.list_errors(run_id, ctx.labels)
        return [case.to_dict() for case in cases[offset : offset + limit]]

    # -- advertisers ----------------------------------------------------------------

    def _advertiser_or_404(advertiser_id: str):
        if advertiser_id not in ctx.corpus.advertisers:
            raise UnknownAdvertiser(f"no advertiser {advertiser_id}")
        return ctx.corpus.advertisers[advertiser_id]

    @app.get("/advertisers/{advertiser_id}/profile")
    def advertiser_profile(advertiser_id: str):
        advertiser = _advertiser_or_404(advertiser_id)
        profile = build_profile(advertiser, ctx.corpus.ads_for(advertiser_id), ctx.budget)
        return profile_to_dict(profile)

    @app.get("/advertisers/{advertiser_id}/verdict")
    def advertiser_verdict(
        advertiser_id: str,
        run: str,
        hints: str | None = Query(None, pattern="^(shown|hidden)$"),
    ):
        _advertiser_or_404(advertiser_id)
        outcome = ctx.store.read_outcome(run, advertiser_id)
        if hints is not None:
            ctx.store.append_hint_view(
                {"advertiser_id": advertiser_id, "run_id": run, "hints": hints}
            )
        summary = _verdict_summary(outcome)
        # The hint panel content is the LLM's summary; hidden means the client
        # asked for the verdict without exposing that panel to the reviewer.
        return {
            "advertiser_id": advertiser_id,
            "run_id": run,
            "hints": hints,
            "outcome": summary,
        }

    # -- labels --------------------------------------------------------------------

    @app.post("/labels")
    def submit_label(body: LabelSubmission):
        _advertiser_or_404(body.advertiser_id)
        if body.label not in Label.__members__:
            raise SchemaError(f"invalid label {body.label!r}")
        record = {
            "advertiser_id": body.advertiser_id,
            "label": body.label,
            "reviewer": body.reviewer,
            "hints_were_shown": body.hints_were_shown,
        }
        ctx.store.append_reviewer_label(record)
        return {"stored": True, **record}

    @app.get("/labels")
    def list_labels(limit: int = Query(500, ge=1), offset: int = Query(0, ge=0)):
        return ctx.store.read_reviewer_labels()[offset : offset + limit]

    # -- triage --------------------------------------------------------------------

    @app.get("/triage/categories")
    def list_categories():
        return [
            {
                "category_id": c.category_id,
                "title": c.title,
                "description": c.description,
                "created_in_revision": c.created_in_revision,
            }
            for c in ctx.triage.list_categories()
        ]

    @app.post("/triage/categories")
    def create_category(body: CategorySubmission):
        category = ctx.triage.add_category(body.title, body.description)
        return {
            "category_id": category.category_id,
            "title": category.title,
            "description": category.description,
            "created_in_revision": category.created_in_revision,
        }

    @app.post("/triage/assignments")
    def create_assignment(body: AssignmentSubmission):
        assignment_id = ctx.triage.bin_error(
            TriageAssignment(
                run_id=body.run_id,
                advertiser_id=body.advertiser_id,
                category_id=body.category_id,
                reviewer_note=body.note,
            )
        )
        return {"assignment_id": assignment_id}

    @app.get("/triage/assignments")
    def list_assignments(run: str):
        current = ctx.triage.current_assignments(run)
        return [
            {
                "run_id": a.run_id,
                "advertiser_id": a.advertiser_id,
                "category_id": a.category_id,
                "reviewer_note": a.reviewer_note,
                "timestamp": a.timestamp,
            }
            for _, a in sorted(current.items())
        ]

    @app.post("/triage/revisions")
    def create_revision(body: RevisionSubmission):
        position = ctx.triage.record_revision(
            RevisionLedgerEntry(
                template_id=body.template_id,
                from_revision=body.from_revision,
                to_revision=body.from_revision + 1,
                addressed_category_ids=body.addressed_category_ids,
                change_note=body.change_note,
            )
        )
        return {"position": position, "to_revision": body.from_revision + 1}

    @app.get("/triage/revisions")
    def list_revisions(template: str | None = None):
        return [
            {
                "template_id": e.template_id,
                "from_revision": e.from_revision,
                "to_revision": e.to_revision,
                "addressed_category_ids": e.addressed_category_ids,
                "change_note": e.change_note,
                "timestamp": e.timestamp,
            }
            for e in ctx.triage.revision_ledger(template)
        ]

    if ctx.workbench_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ctx.workbench_dir, html=True), name="workbench")

    return app


def build_server(ctx: ServiceContext, host: str, port: int) -> uvicorn.Server:
    """A uvicorn server handle; .run() blocks, shutdown is graceful on signal."""
    app = create_app(ctx)
    config = uvicorn.Config(app, host=host, port=port, log_level="info")
    return uvicorn.Server(config)
