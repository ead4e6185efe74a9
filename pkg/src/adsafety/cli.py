"""Operator CLI wiring the pipeline end to end.

Subcommands: ingest-check, select, profile, classify, eval, compare,
triage-export, serve. Each reads the single JSON config file plus flags that
override it (precedence: flags > file > defaults).

Exit codes are a stable scripting contract:
    0 success, 1 usage/config error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .config import ConfigError, PipelineConfig, load_config
from .errors import AdSafetyError
from .evaluation import (
    Split,
    collect_labels,
    compare_reports,
    compute_metrics,
    format_report,
    report_to_dict,
    split_for,
)
from .funnel import select_candidates
from .gateway import BackendFailure
from .pipeline import run_pipeline
from .profiler import build_profile, profile_to_dict
from .service import ServiceContext, build_server
from .store import RunStore
from .triage import TriageCenter

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3

_BACKEND_CODES = {"BackendUnreachable", "BackendHttpError", "Timeout", "RetriesExhausted"}
_USAGE_CODES = {"ConfigError", "BadRatios"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise _UsageError(message)


def _split_arg(value: str) -> Split:
    try:
        return Split[value.upper()]
    except KeyError:
        raise argparse.ArgumentTypeError(
            f"split must be one of {[s.value for s in Split]}, got {value!r}"
        ) from None


def _build_parser() -> _Parser:
    parser = _Parser(prog="adsafety", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the pipeline config JSON")
        return p

    add("ingest-check", "load and validate the corpus, print stats and rejects")

    p = add("select", "print selected candidate advertiser ids, one per line")
    p.add_argument("--split", type=_split_arg, default=None)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--score-floor", type=float, default=None)
    p.add_argument("--min-flagged", type=int, default=None)

    p = add("profile", "print ContentProfile JSON objects, one per line")
    p.add_argument("--candidates", default=None, help="file of advertiser ids, or - for stdin")
    p.add_argument("--split", type=_split_arg, default=None)

    p = add("classify", "run the full pipeline and print the run id")
    p.add_argument("--candidates", default=None, help="file of advertiser ids, or - for stdin")
    p.add_argument("--split", type=_split_arg, default=None)

    p = add("eval", "recompute and print the evaluation report for a stored run")
    p.add_argument("--run", required=True)
    p.add_argument("--json", action="store_true", help="print JSON instead of the table")

    p = add("compare", "compare two stored runs (metric deltas and verdict flips)")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)

    p = add("triage-export", "export errors, histogram, and assignments for a run as JSON")
    p.add_argument("--run", required=True)

    p = add("serve", "start the review HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    return parser


def _overrides(args: argparse.Namespace) -> dict[str, object]:
    mapping = {
        "top_k": "funnel.top_k",
        "score_floor": "funnel.score_floor",
        "min_flagged": "funnel.min_flagged",
        "host": "service.host",
        "port": "service.port",
    }
    out: dict[str, object] = {}
    for attr, dotted in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[dotted] = value
    return out


def _read_candidates(source: str) -> list[str]:
    if source == "-":
        lines = sys.stdin.read().splitlines()
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def _load_corpus(config: PipelineConfig):
    return corpus_mod.load_corpus(config.paths.ads, config.paths.advertisers, config.ingest)


def _stored_report(config: PipelineConfig, store: RunStore, run_id: str):
    run = store.open_run(run_id)
    corpus, _ = _load_corpus(config)
    labels = collect_labels(corpus, config.paths.labels)
    outcomes = store.read_outcomes(run_id)
    verdicts = [
        (advertiser_id, outcome)
        for advertiser_id, outcome in sorted(outcomes.items())
        if not isinstance(outcome, BackendFailure)
    ]
    split = Split(run.split) if run.split else None
    return compute_metrics(
        verdicts,
        labels,
        run_id=run_id,
        split=split,
        template_revision=run.template_revision,
    )


def _cmd_ingest_check(args) -> int:
    config = load_config(args.config)
    corpus, report = _load_corpus(config)
    stats = corpus_mod.corpus_stats(corpus)
    print(
        f"advertisers: {stats.advertisers}  ads: {stats.ads}  "
        f"flagged: {stats.flagged_ads}  labeled: {stats.labeled_ads}"
    )
    print(f"accepted: {report.accepted_advertisers} advertiser lines, {report.accepted_ads} ad lines")
    print(f"rejected: {report.rejected} lines")
    for reject in report.rejects:
        print(f"  {reject.source}.jsonl:{reject.line_no}: {reject.reason}")
    return EXIT_OK


def _cmd_select(args) -> int:
    config = load_config(args.config, _overrides(args))
    corpus, _ = _load_corpus(config)
    candidates = select_candidates(corpus, config.funnel)
    if args.split is not None:
        candidates = [
            c
            for c in candidates
            if split_for(c, config.splits.ratios, config.splits.salt) is args.split
        ]
    for advertiser_id in candidates:
        print(advertiser_id)
    return EXIT_OK


def _cmd_profile(args) -> int:
    config = load_config(args.config)
    corpus, _ = _load_corpus(config)
    if args.candidates:
        candidates = _read_candidates(args.candidates)
    else:
        candidates = select_candidates(corpus, config.funnel)
    if args.split is not None:
        candidates = [
            c
            for c in candidates
            if split_for(c, config.splits.ratios, config.splits.salt) is args.split
        ]
    for advertiser_id in candidates:
        if advertiser_id not in corpus.advertisers:
            raise AdSafetyError(f"unknown advertiser {advertiser_id}")
        profile = build_profile(
            corpus.advertisers[advertiser_id], corpus.ads_for(advertiser_id), config.budget
        )
        print(json.dumps(profile_to_dict(profile), sort_keys=True, ensure_ascii=False))
    return EXIT_OK


def _cmd_classify(args) -> int:
    config = load_config(args.config)
    candidates = _read_candidates(args.candidates) if args.candidates else None
    result = run_pipeline(config, split=args.split, candidates=candidates)
    print(f"run_id: {result.run_id}")
    print(f"status: {result.status.value}  candidates: {len(result.candidates)}")
    if result.report is not None:
        print(format_report(result.report))
    else:
        print("no evaluation report: not all candidates have ground-truth labels")
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = load_config(args.config)
    store = RunStore(config.paths.store_dir)
    report = _stored_report(config, store, args.run)
    if args.json:
        print(json.dumps(report_to_dict(report), sort_keys=True))
    else:
        print(format_report(report))
    return EXIT_OK


def _cmd_compare(args) -> int:
    config = load_config(args.config)
    store = RunStore(config.paths.store_dir)
    before = _stored_report(config, store, args.before)
    after = _stored_report(config, store, args.after)
    delta = compare_reports(before, after)

    def fmt(value):
        return "n/a" if value is None else f"{value:+.4f}"

    print(f"accuracy:  {fmt(delta.accuracy_delta)}")
    print(f"precision: {fmt(delta.precision_delta)}")
    print(f"recall:    {fmt(delta.recall_delta)}")
    print(f"flips: {delta.flip_count}")
    for name, flips in (
        ("good->bad", delta.good_to_bad),
        ("bad->good", delta.bad_to_good),
        ("fixed-parse", delta.fixed_parse),
        ("broke-parse", delta.broke_parse),
    ):
        for advertiser_id in flips:
            print(f"  {name}: {advertiser_id}")
    return EXIT_OK


def _triage_center(config: PipelineConfig, store: RunStore) -> TriageCenter:
    return TriageCenter(
        store,
        split_lookup=lambda advertiser_id: split_for(
            advertiser_id, config.splits.ratios, config.splits.salt
        ),
    )


def _cmd_triage_export(args) -> int:
    config = load_config(args.config)
    store = RunStore(config.paths.store_dir)
    corpus, _ = _load_corpus(config)
    labels = collect_labels(corpus, config.paths.labels)
    triage = _triage_center(config, store)
    errors = triage.list_errors(args.run, labels)
    current = triage.current_assignments(args.run)
    export = {
        "run_id": args.run,
        "errors": [case.to_dict() for case in errors],
        "histogram": triage.category_histogram(args.run),
        "assignments": [
            {
                "advertiser_id": advertiser_id,
                "category_id": assignment.category_id,
                "reviewer_note": assignment.reviewer_note,
                "timestamp": assignment.timestamp,
            }
            for advertiser_id, assignment in sorted(current.items())
        ],
    }
    print(json.dumps(export, indent=2, sort_keys=True))
    return EXIT_OK


def build_service_context(config: PipelineConfig) -> ServiceContext:
    corpus, _ = _load_corpus(config)
    store = RunStore(config.paths.store_dir)
    return ServiceContext(
        store=store,
        corpus=corpus,
        budget=config.budget,
        labels=collect_labels(corpus, config.paths.labels),
        split_lookup=lambda advertiser_id: split_for(
            advertiser_id, config.splits.ratios, config.splits.salt
        ),
        triage=_triage_center(config, store),
        auth_token_env_var=config.service.auth_token_env_var,
        workbench_dir=str(config.service.workbench_dir)
        if config.service.workbench_dir
        else None,
    )


def _cmd_serve(args) -> int:
    config = load_config(args.config, _overrides(args))
    ctx = build_service_context(config)
    server = build_server(ctx, config.service.host, config.service.port)
    server.run()
    return EXIT_OK


_COMMANDS = {
    "ingest-check": _cmd_ingest_check,
    "select": _cmd_select,
    "profile": _cmd_profile,
    "classify": _cmd_classify,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "triage-export": _cmd_triage_export,
    "serve": _cmd_serve,
}


def _exit_code_for(exc: AdSafetyError) -> int:
    if exc.code in _BACKEND_CODES:
        return EXIT_BACKEND
    if exc.code in _USAGE_CODES:
        return EXIT_USAGE
    return EXIT_DATA


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AdSafetyError as exc:
        stage = getattr(exc, "stage", None)
        prefix = f"[{stage}] " if stage else ""
        print(f"{prefix}{exc.code}: {exc}", file=sys.stderr)
        return _exit_code_for(exc)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
