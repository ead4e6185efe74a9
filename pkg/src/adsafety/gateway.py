"""LLM backend dispatch: a minimal HTTP contract plus a deterministic mock.

The wire contract is intentionally tiny (POST text, receive text) so any
hosted model can be adapted with a thin shim. The mock is keyword-based, not
random, so expected confusion matrices in tests are exactly computable.
Prompt content is never logged.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import requests

from .corpus import Label
from .errors import AdSafetyError
from .profiler import normalize_text
from .promptkit import RenderedPrompt

logger = logging.getLogger(__name__)


class BackendUnreachable(AdSafetyError):
    code = "BackendUnreachable"


class BackendHttpError(AdSafetyError):
    code = "BackendHttpError"

    def __init__(self, status: int, message: str = ""):
        super().__init__(message or f"backend returned HTTP {status}")
        self.status = status


class BackendTimeout(AdSafetyError):
    code = "Timeout"


class RetriesExhausted(AdSafetyError):
    code = "RetriesExhausted"


class BackendKind(str, Enum):
    HTTP = "HTTP"
    MOCK = "MOCK"


@dataclass
class MockRule:
    """Keyword rule: if any lexicon entry occurs in the normalized prompt text,
    answer decision_if_match, otherwise the opposite decision."""

    lexicon: list[str] = field(default_factory=list)
    decision_if_match: Label = Label.VIOLATING

    def __post_init__(self) -> None:
        self.lexicon = [normalize_text(term) for term in self.lexicon]

    @property
    def default_decision(self) -> Label:
        return (
            Label.NON_VIOLATING
            if self.decision_if_match is Label.VIOLATING
            else Label.VIOLATING
        )


@dataclass
class BackendConfig:
    kind: BackendKind = BackendKind.MOCK
    endpoint_url: str | None = None
    auth_token_env_var: str | None = None
    timeout: float = 30.0
    max_retries: int = 2
    retry_backoff: float = 0.5
    max_in_flight: int = 8
    mock_rule: MockRule | None = None
    invocation_log: str | None = None

    def validate(self) -> None:
        if self.kind is BackendKind.HTTP and not self.endpoint_url:
            raise AdSafetyError("HTTP backend requires endpoint_url")
        if self.max_retries < 0:
            raise AdSafetyError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise AdSafetyError("max_in_flight must be >= 1")


@dataclass
class BackendFailure:
    """Recordable outcome for a backend error (code mirrors the error class)."""

    code: str
    message: str
    advertiser_id: str = ""


class MockBackend:
    """Deterministic offline backend. Always emits a well-formed four-section
    response, so the whole pipeline is testable without a model."""

    def __init__(self, rule: MockRule | None = None, invocation_log: str | Path | None = None):
        self.rule = rule or MockRule()
        self.invocation_log = Path(invocation_log) if invocation_log else None

    def _log_invocation(self, tag: str) -> None:
        if self.invocation_log is None:
            return
        with open(self.invocation_log, "a", encoding="utf-8") as fh:
            fh.write(tag + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def complete(self, prompt_text: str, tag: str = "") -> str:
        self._log_invocation(tag or "call")
        normalized = normalize_text(prompt_text)
        matched = [term for term in self.rule.lexicon if term and term in normalized]
        decision = self.rule.decision_if_match if matched else self.rule.default_decision
        if matched:
            rationale = "Matched policy lexicon terms: " + ", ".join(matched) + "."
        else:
            rationale = "No policy lexicon terms matched."
        return (
            f"SUMMARY: Reviewed the advertiser content profile "
            f"({len(prompt_text)} prompt characters).\n"
            f"PRODUCTS: Products and services as described in the content profile.\n"
            f"DECISION: {decision.value}\n"
            f"RATIONALE: {rationale}"
        )


class HttpBackend:
    """POST the prompt, return the completion. Transient failures (connection
    errors, timeouts, 429/5xx) are retried up to max_retries with backoff."""

    def __init__(self, config: BackendConfig):
        self.config = config

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_token_env_var:
            token = os.environ.get(self.config.auth_token_env_var)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, prompt_text: str, tag: str = "") -> str:
        attempts = self.config.max_retries + 1
        last: AdSafetyError | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.retry_backoff * attempt)
            try:
                response = requests.post(
                    self.config.endpoint_url,
                    json={"prompt": prompt_text},
                    headers=self._headers(),
                    timeout=self.config.timeout,
                )
            except requests.Timeout:
                last = BackendTimeout(f"no response within {self.config.timeout}s")
                continue
            except requests.ConnectionError as exc:
                last = BackendUnreachable(str(exc))
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last = RetriesExhausted(
                    f"transient HTTP {response.status_code} persisted after {attempts} attempts"
                )
                continue
            if not 200 <= response.status_code < 300:
                raise BackendHttpError(response.status_code)
            try:
                body = response.json()
                text = body["text"]
            except (ValueError, KeyError, TypeError):
                raise BackendHttpError(
                    response.status_code, "response body is not {'text': ...} JSON"
                ) from None
            if not isinstance(text, str):
                raise BackendHttpError(response.status_code, "'text' field is not a string")
            return text
        assert last is not None
        raise last


class LlmGateway:
    """Dispatch prompts to the configured backend with a max-in-flight bound.

    Safe to share across worker threads; the semaphore is the only shared
    state.
    """

    def __init__(self, config: BackendConfig):
        config.validate()
        self.config = config
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)
        if config.kind is BackendKind.MOCK:
            self._backend = MockBackend(config.mock_rule, config.invocation_log)
        else:
            self._backend = HttpBackend(config)

    def complete(self, prompt: RenderedPrompt) -> str:
        logger.debug(
            "dispatching prompt for advertiser %s (%d chars)",
            prompt.advertiser_id,
            len(prompt.text),
        )
        with self._semaphore:
            return self._backend.complete(prompt.text, tag=prompt.advertiser_id)


def complete(prompt: RenderedPrompt, config: BackendConfig) -> str:
    """One-shot convenience wrapper around LlmGateway."""
    return LlmGateway(config).complete(prompt)
