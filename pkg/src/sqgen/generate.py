"""Drives question generation against a completion provider.

Two regimes: one completion per question (one_to_one) and batched multi-
question completions (context_aware / intention_enhanced), where each call
asks for K questions and calls repeat until the requested number of unique
questions is collected or the retry budget runs out. Shortfall is flagged,
never padded.

Calls within a batch may run concurrently; results are reassembled in
request-index order so output is deterministic regardless of completion
order.
"""

from __future__ import annotations

import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil

from .kb import QAPair
from .normalize import normalize_text
from .prompts import BATCH_TEMPLATE_IDS, INTENTION_ENHANCED, ONE_TO_ONE, build_generation_prompt
from .providers import CompletionProvider, ProviderError, SamplingParams

log = logging.getLogger(__name__)

DEFAULT_K_PER_CALL = 20
DEFAULT_RETRY_FACTOR = 3

# Leading enumeration markers: "1.", "1、", "1)", "- ", circled digits.
_MARKER = re.compile(r"^\s*(?:\d+\s*[.、．)）]|[-•]\s|[①-⑳])\s*")


class ParseError(ValueError):
    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class BatchGenerationError(Exception):
    """Every provider call in a batch failed."""

    def __init__(self, failures: list[str]):
        self.failures = failures
        super().__init__(f"all {len(failures)} call(s) failed: {failures[0] if failures else ''}")


@dataclass
class GenerationBatch:
    """Ordered, deduplicated output of one generation run for one pair."""

    pair_id: str
    mode: str
    requested_count: int
    k_per_call: int
    raw_responses: list[str]
    questions: list[str]
    sampling: SamplingParams
    provider_id: str
    underfilled: bool = False
    failures: list[str] = field(default_factory=list)
    duration_s: float = 0.0

    def __post_init__(self) -> None:
        if len(self.questions) > self.requested_count:
            raise ValueError("batch holds more questions than requested")
        keys = [normalize_text(q) for q in self.questions]
        if len(set(keys)) != len(keys):
            raise ValueError("batch questions contain duplicates")

    def to_record(self) -> dict:
        # Stable content only: timing stays out so re-runs are byte-identical.
        return {
            "pair_id": self.pair_id,
            "mode": self.mode,
            "requested_count": self.requested_count,
            "k_per_call": self.k_per_call,
            "provider_id": self.provider_id,
            "sampling": self.sampling.to_payload(),
            "underfilled": self.underfilled,
            "questions": list(self.questions),
            "raw_responses": list(self.raw_responses),
            "failures": list(self.failures),
        }


def parse_multi_question(raw: str, expected_k: int) -> list[str]:
    """Split a multi-question response into clean question strings.

    Lines are the unit; leading enumeration markers and surrounding
    whitespace are stripped and empty lines dropped. A count differing from
    expected_k is logged as a deviation, not an error; zero parseable items
    is an error.
    """
    items = []
    for line in raw.splitlines():
        cleaned = _MARKER.sub("", line, count=1).strip()
        if cleaned:
            items.append(cleaned)
    if not items:
        raise ParseError("no parseable questions in response", raw=raw)
    if len(items) != expected_k:
        log.warning("expected %d questions, parsed %d", expected_k, len(items))
    return items


def dedup(questions: list[str], source_question: str | None = None) -> list[str]:
    """Drop repeats of the source question or of earlier items.

    Comparison uses the store's normalization; first occurrence order is
    preserved. Idempotent.
    """
    seen: set[str] = set()
    if source_question is not None:
        seen.add(normalize_text(source_question))
    out = []
    for q in questions:
        key = normalize_text(q)
        if key in seen:
            continue
        seen.add(key)
        out.append(q)
    return out


def _run_wave(
    provider: CompletionProvider,
    prompt: str,
    params: SamplingParams,
    size: int,
    max_parallel: int,
) -> list[str | Exception]:
    """Issue `size` identical calls, results in request-index order."""

    def one(_: int) -> str:
        return provider.complete(prompt, params)

    if max_parallel <= 1 or size == 1:
        results: list[str | Exception] = []
        for i in range(size):
            try:
                results.append(one(i))
            except Exception as exc:
                results.append(exc)
        return results
    with ThreadPoolExecutor(max_workers=min(max_parallel, size)) as pool:
        futures = [pool.submit(one, i) for i in range(size)]
        results = []
        for fut in futures:
            try:
                results.append(fut.result())
            except Exception as exc:
                results.append(exc)
        return results


def generate_one_to_one(
    provider: CompletionProvider,
    source_question: str,
    n: int,
    params: SamplingParams | None = None,
    pair_id: str = "",
    max_parallel: int = 1,
) -> GenerationBatch:
    """n independent single-question completions, parsed and deduplicated.

    Partial results are returned when some calls fail; a batch error is
    raised only when every call failed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    params = params or SamplingParams()
    prompt = build_generation_prompt(ONE_TO_ONE, source_question)
    start = time.monotonic()

    raw_responses: list[str] = []
    candidates: list[str] = []
    failures: list[str] = []
    results = _run_wave(provider, prompt, params, n, max_parallel)
    for i, result in enumerate(results):
        if isinstance(result, Exception):
            failures.append(f"call {i + 1}: {result}")
            continue
        try:
            parsed = parse_multi_question(result, expected_k=1)
        except ParseError:
            failures.append(f"call {i + 1}: empty response")
            continue
        raw_responses.append(result)
        candidates.append(parsed[0])

    if not raw_responses:
        raise BatchGenerationError(failures)

    questions = dedup(candidates, source_question)[:n]
    return GenerationBatch(
        pair_id=pair_id,
        mode=ONE_TO_ONE,
        requested_count=n,
        k_per_call=1,
        raw_responses=raw_responses,
        questions=questions,
        sampling=params,
        provider_id=provider.provider_id,
        underfilled=len(questions) < n,
        failures=failures,
        duration_s=time.monotonic() - start,
    )


def generate_batch(
    provider: CompletionProvider,
    qa: QAPair,
    n: int,
    mode: str,
    k_per_call: int = DEFAULT_K_PER_CALL,
    params: SamplingParams | None = None,
    max_parallel: int = 1,
    retry_factor: int = DEFAULT_RETRY_FACTOR,
) -> GenerationBatch:
    """Collect n unique questions through repeated K-per-call completions.

    The call budget is retry_factor times the minimum call count; if it runs
    out first the batch comes back flagged underfilled rather than failing.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if k_per_call < 1:
        raise ValueError("k_per_call must be >= 1")
    if mode not in BATCH_TEMPLATE_IDS:
        raise ValueError(f"generate_batch mode must be one of {BATCH_TEMPLATE_IDS}, got {mode!r}")
    params = params or SamplingParams()
    source_question = qa.source_question
    prompt = build_generation_prompt(
        mode,
        source_question,
        answer=qa.answer if mode == INTENTION_ENHANCED else None,
        k=k_per_call,
    )

    min_calls = ceil(n / k_per_call)
    budget = retry_factor * min_calls
    start = time.monotonic()

    raw_responses: list[str] = []
    questions: list[str] = []
    seen: set[str] = {normalize_text(source_question)}
    failures: list[str] = []
    calls_made = 0

    while len(questions) < n and calls_made < budget:
        needed_calls = max(1, ceil((n - len(questions)) / k_per_call))
        wave = min(needed_calls, budget - calls_made, max(1, max_parallel))
        results = _run_wave(provider, prompt, params, wave, max_parallel)
        for result in results:
            calls_made += 1
            if isinstance(result, Exception):
                failures.append(f"call {calls_made}: {result}")
                continue
            try:
                parsed = parse_multi_question(result, expected_k=k_per_call)
            except ParseError as exc:
                failures.append(f"call {calls_made}: {exc}")
                continue
            raw_responses.append(result)
            for q in parsed:
                key = normalize_text(q)
                if key in seen:
                    continue
                seen.add(key)
                questions.append(q)

    if not raw_responses:
        raise BatchGenerationError(failures)

    questions = questions[:n]
    underfilled = len(questions) < n
    if underfilled:
        log.warning(
            "pair %s: collected %d/%d unique questions after %d call(s)",
            qa.pair_id,
            len(questions),
            n,
            calls_made,
        )
    return GenerationBatch(
        pair_id=qa.pair_id,
        mode=mode,
        requested_count=n,
        k_per_call=k_per_call,
        raw_responses=raw_responses,
        questions=questions,
        sampling=params,
        provider_id=provider.provider_id,
        underfilled=underfilled,
        failures=failures,
        duration_s=time.monotonic() - start,
    )


def batch_from_record(record: dict) -> GenerationBatch:
    """Rebuild a batch from its JSONL record (timing is not persisted)."""
    sampling = record.get("sampling", {})
    return GenerationBatch(
        pair_id=record["pair_id"],
        mode=record["mode"],
        requested_count=record["requested_count"],
        k_per_call=record["k_per_call"],
        raw_responses=list(record.get("raw_responses", [])),
        questions=list(record["questions"]),
        sampling=SamplingParams(
            temperature=sampling.get("temperature", 0.9),
            top_k=sampling.get("top_k"),
            top_p=sampling.get("top_p"),
            max_tokens=sampling.get("max_tokens", 512),
            seed=sampling.get("seed"),
        ),
        provider_id=record.get("provider_id", "unknown"),
        underfilled=record.get("underfilled", False),
        failures=list(record.get("failures", [])),
    )
