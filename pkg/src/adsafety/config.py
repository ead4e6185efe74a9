"""Pipeline configuration: one JSON document, validated with unknown-key
rejection so typos fail loudly instead of silently using defaults."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import IngestConfig, Label
from .errors import AdSafetyError
from .evaluation import SplitRatios
from .funnel import FunnelConfig
from .gateway import BackendConfig, BackendKind, MockRule
from .profiler import BudgetConfig
from .promptkit import PromptBudget


class ConfigError(AdSafetyError):
    code = "ConfigError"


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys in {where}: {sorted(unknown)}")


@dataclass
class PathsConfig:
    ads: Path
    advertisers: Path
    store_dir: Path
    template: Path
    policy: Path
    labels: Path | None = None


@dataclass
class SplitsConfig:
    ratios: SplitRatios = field(
        default_factory=lambda: SplitRatios(0.4, 0.4, 0.2)
    )
    salt: str = "v1"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8300
    auth_token_env_var: str | None = None
    workbench_dir: Path | None = None


@dataclass
class PipelineConfig:
    paths: PathsConfig
    ingest: IngestConfig = field(default_factory=IngestConfig)
    funnel: FunnelConfig = field(default_factory=FunnelConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    prompt: PromptBudget = field(default_factory=PromptBudget)
    backend: BackendConfig = field(default_factory=BackendConfig)
    splits: SplitsConfig = field(default_factory=SplitsConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    workers: int = 8


def _paths_from_dict(obj: dict, base: Path) -> PathsConfig:
    _check_keys(
        obj, {"ads", "advertisers", "labels", "store_dir", "template", "policy"}, "paths"
    )
    for key in ("ads", "advertisers", "store_dir", "template", "policy"):
        if key not in obj:
            raise ConfigError(f"paths.{key} is required")

    def resolve(value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else base / path

    return PathsConfig(
        ads=resolve(obj["ads"]),
        advertisers=resolve(obj["advertisers"]),
        store_dir=resolve(obj["store_dir"]),
        template=resolve(obj["template"]),
        policy=resolve(obj["policy"]),
        labels=resolve(obj["labels"]) if obj.get("labels") else None,
    )


def _backend_from_dict(obj: dict) -> BackendConfig:
    _check_keys(
        obj,
        {
            "kind",
            "endpoint_url",
            "auth_token_env_var",
            "timeout",
            "max_retries",
            "retry_backoff",
            "max_in_flight",
            "invocation_log",
            "mock",
        },
        "backend",
    )
    kind_raw = obj.get("kind", "MOCK")
    if kind_raw not in BackendKind.__members__:
        raise ConfigError(f"backend.kind must be HTTP or MOCK, got {kind_raw!r}")
    mock_rule = None
    if "mock" in obj and obj["mock"] is not None:
        mock_obj = obj["mock"]
        _check_keys(mock_obj, {"lexicon", "decision_if_match"}, "backend.mock")
        decision_raw = mock_obj.get("decision_if_match", "VIOLATING")
        if decision_raw not in Label.__members__:
            raise ConfigError(
                f"backend.mock.decision_if_match must be a label, got {decision_raw!r}"
            )
        mock_rule = MockRule(
            lexicon=list(mock_obj.get("lexicon", [])),
            decision_if_match=Label[decision_raw],
        )
    config = BackendConfig(
        kind=BackendKind[kind_raw],
        endpoint_url=obj.get("endpoint_url"),
        auth_token_env_var=obj.get("auth_token_env_var"),
        timeout=float(obj.get("timeout", 30.0)),
        max_retries=int(obj.get("max_retries", 2)),
        retry_backoff=float(obj.get("retry_backoff", 0.5)),
        max_in_flight=int(obj.get("max_in_flight", 8)),
        mock_rule=mock_rule,
        invocation_log=obj.get("invocation_log"),
    )
    config.validate()
    return config


def config_from_dict(obj: dict, base: Path) -> PipelineConfig:
    _check_keys(
        obj,
        {
            "paths",
            "ingest",
            "funnel",
            "budget",
            "prompt",
            "backend",
            "splits",
            "service",
            "workers",
        },
        "config",
    )
    if "paths" not in obj:
        raise ConfigError("config must define paths")
    paths = _paths_from_dict(obj["paths"], base)

    ingest_obj = obj.get("ingest", {})
    _check_keys(ingest_obj, {"strict", "flag_threshold"}, "ingest")
    ingest = IngestConfig(
        strict=bool(ingest_obj.get("strict", False)),
        flag_threshold=float(ingest_obj.get("flag_threshold", 0.5)),
    )

    funnel_obj = obj.get("funnel", {})
    _check_keys(funnel_obj, {"min_flagged", "top_k", "score_floor", "fp_boost"}, "funnel")
    funnel = FunnelConfig(
        min_flagged=int(funnel_obj.get("min_flagged", 1)),
        top_k=int(funnel_obj["top_k"]) if funnel_obj.get("top_k") is not None else None,
        score_floor=float(funnel_obj.get("score_floor", 0.0)),
        fp_boost=float(funnel_obj.get("fp_boost", 0.5)),
    )
    funnel.validate()

    budget_obj = obj.get("budget", {})
    _check_keys(
        budget_obj,
        {
            "max_items",
            "known_false_positive_quota",
            "already_labeled_quota",
            "most_relevant_quota",
            "relevance_rank",
        },
        "budget",
    )
    budget = BudgetConfig(
        max_items=int(budget_obj.get("max_items", 30)),
        known_false_positive_quota=int(budget_obj.get("known_false_positive_quota", 10)),
        already_labeled_quota=int(budget_obj.get("already_labeled_quota", 10)),
        most_relevant_quota=int(budget_obj.get("most_relevant_quota", 10)),
        relevance_rank=budget_obj.get("relevance_rank", "BY_BASELINE_SCORE_DESC"),
    )
    budget.validate()

    prompt_obj = obj.get("prompt", {})
    _check_keys(prompt_obj, {"max_chars"}, "prompt")
    prompt = PromptBudget(max_chars=int(prompt_obj.get("max_chars", 30000)))

    backend = _backend_from_dict(obj.get("backend", {}))

    splits_obj = obj.get("splits", {})
    _check_keys(splits_obj, {"ratios", "salt"}, "splits")
    ratios_raw = splits_obj.get("ratios", [0.4, 0.4, 0.2])
    if not isinstance(ratios_raw, list) or len(ratios_raw) != 3:
        raise ConfigError("splits.ratios must be a list of three numbers")
    ratios = SplitRatios(*(float(r) for r in ratios_raw))
    ratios.validate()
    splits = SplitsConfig(ratios=ratios, salt=str(splits_obj.get("salt", "v1")))

    service_obj = obj.get("service", {})
    _check_keys(service_obj, {"host", "port", "auth_token_env_var", "workbench_dir"}, "service")
    workbench_dir = None
    if service_obj.get("workbench_dir"):
        raw_dir = Path(service_obj["workbench_dir"])
        workbench_dir = raw_dir if raw_dir.is_absolute() else base / raw_dir
    service = ServiceConfig(
        host=service_obj.get("host", "127.0.0.1"),
        port=int(service_obj.get("port", 8300)),
        auth_token_env_var=service_obj.get("auth_token_env_var"),
        workbench_dir=workbench_dir,
    )

    workers = int(obj.get("workers", 8))
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    return PipelineConfig(
        paths=paths,
        ingest=ingest,
        funnel=funnel,
        budget=budget,
        prompt=prompt,
        backend=backend,
        splits=splits,
        service=service,
        workers=workers,
    )


def apply_overrides(obj: dict, overrides: dict[str, object]) -> dict:
    """Apply dotted-key overrides ('funnel.top_k') onto a raw config dict.
    Precedence: flags > file > defaults."""
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = obj
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return obj


def load_config(path: str | Path, overrides: dict[str, object] | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if overrides:
        raw = apply_overrides(raw, overrides)
    return config_from_dict(raw, base=path.parent.resolve())
