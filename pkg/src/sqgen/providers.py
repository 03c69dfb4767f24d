"""Completion-model providers behind one minimal contract.

A provider turns a prompt plus sampling parameters into text. The HTTP
provider speaks a small JSON protocol; the mock provider replays scripted
responses from a file so every pipeline stage can run offline and
deterministically.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import requests

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingParams:
    """Sampling knobs passed through to the provider."""

    temperature: float = 0.9
    top_k: int | None = 5
    top_p: float | None = None
    max_tokens: int = 512
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1 when present")
        if self.top_p is not None and not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1] when present")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def to_payload(self) -> dict:
        payload: dict = {"temperature": self.temperature, "max_tokens": self.max_tokens}
        if self.top_k is not None:
            payload["top_k"] = self.top_k
        if self.top_p is not None:
            payload["top_p"] = self.top_p
        if self.seed is not None:
            payload["seed"] = self.seed
        return payload


class ProviderError(Exception):
    pass


class CompletionProvider(ABC):
    provider_id: str = "provider"

    @abstractmethod
    def complete(self, prompt: str, params: SamplingParams) -> str:
        """Return the completion text for one prompt; raise ProviderError on failure."""


class HTTPCompletionProvider(CompletionProvider):
    """Client for a completion endpoint.

    POST {base_url}/v1/complete with the prompt and sampling payload; the
    response must be 2xx JSON carrying a "text" string, anything else counts
    as a call failure.
    """

    def __init__(self, base_url: str, token: str | None = None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self.provider_id = f"http:{self.base_url}"
        self._session = requests.Session()

    def complete(self, prompt: str, params: SamplingParams) -> str:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        body = {"prompt": prompt, **params.to_payload()}
        try:
            resp = self._session.post(
                f"{self.base_url}/v1/complete", json=body, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ProviderError(f"completion request failed: {exc}") from exc
        if resp.status_code < 200 or resp.status_code >= 300:
            raise ProviderError(f"completion endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProviderError(f"completion endpoint returned non-JSON body: {exc}") from exc
        text = payload.get("text")
        if not isinstance(text, str):
            raise ProviderError('completion response missing "text" field')
        return text


@dataclass
class ScriptEntry:
    match: str  # "exact" or "prefix"
    prompt: str
    responses: list[str]
    cursor: int = 0

    def matches(self, prompt: str) -> bool:
        if self.match == "exact":
            return prompt == self.prompt
        return prompt.startswith(self.prompt)

    def next_response(self) -> str:
        response = self.responses[self.cursor % len(self.responses)]
        self.cursor += 1
        return response


class MockProvider(CompletionProvider):
    """File-scripted provider: prompt patterns to canned responses.

    Script lines are JSON objects {"match": "exact"|"prefix", "prompt": str,
    "responses": [str]}; an entry's responses are consumed round-robin. The
    first matching entry in file order wins. Every call is appended to
    call_log for reproducibility assertions.
    """

    def __init__(self, entries: list[ScriptEntry], provider_id: str = "mock:inline"):
        self.entries = entries
        self.provider_id = provider_id
        self.call_log: list[tuple[str, SamplingParams]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_script(cls, path: str | Path) -> "MockProvider":
        path = Path(path)
        raw = path.read_bytes()
        entries = []
        for line_no, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                entries.append(
                    ScriptEntry(
                        match=record.get("match", "exact"),
                        prompt=record["prompt"],
                        responses=list(record["responses"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ProviderError(f"bad mock script line {line_no}: {exc}") from exc
        for entry in entries:
            if entry.match not in ("exact", "prefix"):
                raise ProviderError(f"unknown match rule {entry.match!r}")
            if not entry.responses:
                raise ProviderError(f"script entry with empty responses: {entry.prompt!r}")
        digest = hashlib.sha256(raw).hexdigest()[:8]
        return cls(entries, provider_id=f"mock:{digest}")

    def complete(self, prompt: str, params: SamplingParams) -> str:
        with self._lock:
            self.call_log.append((prompt, params))
            for entry in self.entries:
                if entry.matches(prompt):
                    return entry.next_response()
        raise ProviderError(f"no scripted response for prompt: {prompt[:80]!r}")


class FailingProvider(CompletionProvider):
    """Always raises; handy for exercising failure paths."""

    def __init__(self, message: str = "simulated timeout"):
        self.message = message
        self.provider_id = "mock:failing"
        self.call_count = 0

    def complete(self, prompt: str, params: SamplingParams) -> str:
        self.call_count += 1
        raise ProviderError(self.message)
