"""Quantitative metrics for generated question sets.

Semantic relevance is scored with greedy token matching over contextual
embeddings: each generated question is credited with its best-matching
reference (precision) and each reference with its best-matching generated
question (recall). Character-level diversity uses the distinct-N ratio over
pooled character n-grams. The acceptance ratio summarizes expert review
marks.

Per-pair numbers are macro-averaged across pairs; the report-level F1 is
recomputed from the averaged precision and recall so the harmonic-mean
relation always holds on the reported values.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from . import kernels
from .embedders import TokenEmbeddingSet
from .normalize import is_blank

log = logging.getLogger(__name__)


class TokenEmbedderLike(Protocol):
    embedder_id: str

    def embed_tokens(self, texts: list[str]) -> list[TokenEmbeddingSet]: ...


class MetricsError(ValueError):
    pass


# ── greedy-matching score ────────────────────────────────────────────────────


def bertscore(candidate: TokenEmbeddingSet, reference: TokenEmbeddingSet) -> float:
    """Scalar similarity in [-1, 1] between two token embedding sets.

    Computed as the harmonic mean of token-level greedy precision and recall
    over cosine similarities; symmetric in its arguments by construction.
    """
    if candidate.dim != reference.dim:
        raise MetricsError(f"dimension mismatch: {candidate.dim} vs {reference.dim}")
    return kernels.bertscore_f1(candidate.vectors, reference.vectors)


def build_score_matrix(
    generated: Sequence[TokenEmbeddingSet], references: Sequence[TokenEmbeddingSet]
) -> np.ndarray:
    """n x m matrix of pairwise scores; rows generated, columns references."""
    if not generated or not references:
        raise MetricsError("score matrix requires non-empty generated and reference sets")
    return kernels.score_matrix(
        [g.vectors for g in generated], [r.vectors for r in references]
    )


def _check_matrix(score_matrix: np.ndarray) -> np.ndarray:
    s = np.asarray(score_matrix, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
        raise MetricsError(f"score matrix must be n x m with n,m >= 1, got shape {s.shape}")
    return s


def semantic_precision(score_matrix: np.ndarray) -> float:
    """Mean over generated questions of their best score against any reference."""
    s = _check_matrix(score_matrix)
    return float(s.max(axis=1).mean())


def semantic_recall(score_matrix: np.ndarray) -> float:
    """Mean over reference questions of their best score against any generated one."""
    s = _check_matrix(score_matrix)
    return float(s.max(axis=0).mean())


def semantic_f1(precision: float, recall: float) -> float:
    return kernels.f1_from(precision, recall)


# ── character-level diversity ────────────────────────────────────────────────


def _pooled_ngrams(questions: Sequence[str], n: int) -> Counter:
    grams: Counter = Counter()
    for q in questions:
        chars = [ch for ch in q if not ch.isspace()]
        for i in range(len(chars) - n + 1):
            grams["".join(chars[i : i + n])] += 1
    return grams


def distinct_n(questions: Sequence[str], n: int) -> float:
    """Unique / total character n-grams pooled over all questions.

    Whitespace is dropped before windowing; questions shorter than n
    contribute nothing. Returns 0.0 when no n-grams exist at all.
    """
    if not questions:
        raise MetricsError("distinct_n requires a non-empty question list")
    if n < 1:
        raise MetricsError("n must be >= 1")
    grams = _pooled_ngrams(questions, n)
    total = sum(grams.values())
    if total == 0:
        return 0.0
    return len(grams) / total


def distinct_avg(questions: Sequence[str]) -> float:
    return (distinct_n(questions, 1) + distinct_n(questions, 2)) / 2


# ── acceptance ratio ─────────────────────────────────────────────────────────


class MarkLike(Protocol):
    item_id: str
    verdict: str


def acceptance_ratio(marks: Sequence[MarkLike]) -> float:
    """Accepted fraction of marked questions; each item marked exactly once."""
    if not marks:
        raise MetricsError("acceptance_ratio requires at least one mark")
    seen: set[str] = set()
    accepted = 0
    for mark in marks:
        if mark.item_id in seen:
            raise MetricsError(f"duplicate mark for item {mark.item_id!r}")
        seen.add(mark.item_id)
        if mark.verdict == "accept":
            accepted += 1
        elif mark.verdict != "reject":
            raise MetricsError(f"unknown verdict {mark.verdict!r}")
    return accepted / len(marks)


# ── run-level reports ────────────────────────────────────────────────────────


@dataclass
class MetricsReport:
    """One row of run metrics at a single generation count."""

    precision: float
    recall: float
    f1: float
    distinct_1: float
    distinct_2: float
    distinct_avg: float
    generated_count: int
    acceptance_ratio: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if abs(self.f1 - semantic_f1(self.precision, self.recall)) > 1e-12:
            raise MetricsError("f1 must be the harmonic mean of precision and recall")
        if abs(self.distinct_avg - (self.distinct_1 + self.distinct_2) / 2) > 1e-12:
            raise MetricsError("distinct_avg must average distinct_1 and distinct_2")
        for name in ("distinct_1", "distinct_2", "distinct_avg"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise MetricsError(f"{name} out of [0, 1]: {value}")
        if self.acceptance_ratio is not None and not 0.0 <= self.acceptance_ratio <= 1.0:
            raise MetricsError(f"acceptance_ratio out of [0, 1]: {self.acceptance_ratio}")

    def to_record(self) -> dict:
        return {
            "generated_count": self.generated_count,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "distinct_1": self.distinct_1,
            "distinct_2": self.distinct_2,
            "distinct_avg": self.distinct_avg,
            "acceptance_ratio": self.acceptance_ratio,
            "metadata": self.metadata,
        }


def make_report(
    precision: float,
    recall: float,
    distinct_1: float,
    distinct_2: float,
    generated_count: int,
    acceptance_ratio: float | None = None,
    metadata: dict | None = None,
) -> MetricsReport:
    return MetricsReport(
        precision=precision,
        recall=recall,
        f1=semantic_f1(precision, recall),
        distinct_1=distinct_1,
        distinct_2=distinct_2,
        distinct_avg=(distinct_1 + distinct_2) / 2,
        generated_count=generated_count,
        acceptance_ratio=acceptance_ratio,
        metadata=metadata or {},
    )


def evaluate_run(
    generated_per_pair: Mapping[str, Sequence[str]],
    references_per_pair: Mapping[str, Sequence[str]],
    embedder: TokenEmbedderLike,
    counts: Iterable[int],
) -> list[MetricsReport]:
    """Metric curve over generation counts.

    For each requested count n, the first n generated questions of every pair
    are scored against that pair's references; per-pair precision, recall,
    and distinct statistics are macro-averaged into one report. Pairs with
    fewer than n generated questions are truncated with a warning.
    """
    counts = list(counts)
    if not counts or any(c < 1 for c in counts):
        raise MetricsError("counts must be a non-empty list of positive integers")
    pair_ids = [pid for pid in generated_per_pair if generated_per_pair[pid]]
    if not pair_ids:
        raise MetricsError("no generated questions to evaluate")
    for pid in pair_ids:
        refs = references_per_pair.get(pid)
        if not refs:
            raise MetricsError(f"pair {pid!r} has no reference questions")
        if any(is_blank(r) for r in refs):
            raise MetricsError(f"pair {pid!r} has a blank reference question")

    # Embed each pair's full question sets once; counts reuse prefixes.
    gen_sets: dict[str, list[TokenEmbeddingSet]] = {}
    ref_sets: dict[str, list[TokenEmbeddingSet]] = {}
    max_count = max(counts)
    for pid in pair_ids:
        gen_texts = list(generated_per_pair[pid])[:max_count]
        if len(gen_texts) < max_count:
            log.warning(
                "pair %s: only %d generated question(s) available for counts up to %d",
                pid,
                len(gen_texts),
                max_count,
            )
        try:
            gen_sets[pid] = embedder.embed_tokens(gen_texts)
            ref_sets[pid] = embedder.embed_tokens(list(references_per_pair[pid]))
        except Exception as exc:
            raise MetricsError(f"embedding failed for pair {pid!r}: {exc}") from exc

    reports = []
    for n in counts:
        precisions, recalls, d1s, d2s = [], [], [], []
        for pid in pair_ids:
            take = min(n, len(gen_sets[pid]))
            gen_slice = gen_sets[pid][:take]
            texts = list(generated_per_pair[pid])[:take]
            s = build_score_matrix(gen_slice, ref_sets[pid])
            precisions.append(semantic_precision(s))
            recalls.append(semantic_recall(s))
            d1s.append(distinct_n(texts, 1))
            d2s.append(distinct_n(texts, 2))
        reports.append(
            make_report(
                precision=float(np.mean(precisions)),
                recall=float(np.mean(recalls)),
                distinct_1=float(np.mean(d1s)),
                distinct_2=float(np.mean(d2s)),
                generated_count=n,
                metadata={"pairs": len(pair_ids), "embedder": embedder.embedder_id},
            )
        )
    return reports
