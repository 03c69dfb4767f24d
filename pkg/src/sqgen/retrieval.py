"""Retrieval chatbot simulation: index KB questions, match queries, score accuracy.

An incoming query is embedded at sentence granularity and matched against
every indexed question by cosine similarity; the best-matched question's
pair supplies the answer. The experiment harness compares top-1 accuracy
across index conditions (base questions only, plus accepted candidates, or
plus everything generated) to quantify what expansion buys.

The scan is exact brute-force cosine; desk-scale KBs keep that cheap and
the results reproducible.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Protocol

import numpy as np

from .kb import KBError, KnowledgeBase, iter_questions

INCLUDE_MODES = ("none", "accepted_only", "all")


class SentenceEmbedderLike(Protocol):
    embedder_id: str

    def embed_sentences(self, texts: list[str]) -> np.ndarray: ...


class RetrievalError(Exception):
    pass


@dataclass
class QuestionIndex:
    texts: list[str]
    pair_ids: list[str]
    matrix: np.ndarray  # unit-norm rows, one per entry
    embedder_id: str
    built_at: str

    def __len__(self) -> int:
        return len(self.texts)


@dataclass(frozen=True)
class MatchResult:
    pair_id: str
    question: str
    score: float
    entry_index: int


@dataclass(frozen=True)
class LabeledQuery:
    query: str
    expected_pair_id: str


@dataclass
class ExperimentResult:
    rows: list[dict]  # condition, top1_accuracy, n_queries
    per_pair: list[dict] = field(default_factory=list)  # pair_id, condition, accuracy, delta


def build_index(
    kb: KnowledgeBase, embedder: SentenceEmbedderLike, include_generated: str = "none"
) -> QuestionIndex:
    """Embed the KB's questions into a matchable index.

    Entry order is pair order then question order (source questions first,
    generated after), which also fixes tie-breaking downstream.
    """
    if not kb.pairs:
        raise RetrievalError("cannot index an empty knowledge base")
    entries = list(iter_questions(kb, include_generated))
    texts = [q for q, _ in entries]
    pair_ids = [pid for _, pid in entries]
    vectors = np.asarray(embedder.embed_sentences(texts), dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(texts):
        raise RetrievalError("embedder returned a malformed vector matrix")
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise RetrievalError("embedder returned a zero vector")
    return QuestionIndex(
        texts=texts,
        pair_ids=pair_ids,
        matrix=vectors / norms,
        embedder_id=embedder.embedder_id,
        built_at=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    )


def match(index: QuestionIndex, query: str, embedder: SentenceEmbedderLike) -> MatchResult:
    """Best-matching entry by cosine similarity; ties go to the lowest index."""
    if len(index) == 0:
        raise RetrievalError("cannot match against an empty index")
    if embedder.embedder_id != index.embedder_id:
        raise RetrievalError(
            f"index built with {index.embedder_id!r} but queried with {embedder.embedder_id!r}"
        )
    vec = np.asarray(embedder.embed_sentences([query]), dtype=np.float64)[0]
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise RetrievalError(f"query embedded to a zero vector: {query!r}")
    scores = index.matrix @ (vec / norm)
    best = int(np.argmax(scores))  # first occurrence wins on exact ties
    return MatchResult(
        pair_id=index.pair_ids[best],
        question=index.texts[best],
        score=float(scores[best]),
        entry_index=best,
    )


def load_queries(path: str | Path) -> list[LabeledQuery]:
    queries = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            try:
                queries.append(
                    LabeledQuery(query=record["query"], expected_pair_id=record["expected_pair_id"])
                )
            except KeyError as exc:
                raise RetrievalError(f"query line {line_no} missing field {exc}") from exc
    return queries


def run_experiment(
    kb: KnowledgeBase,
    embedder: SentenceEmbedderLike,
    queries: list[LabeledQuery],
    conditions: list[str],
) -> ExperimentResult:
    """Top-1 accuracy per index condition, with per-pair deltas vs the first."""
    if not queries:
        raise RetrievalError("run_experiment requires at least one query")
    if not conditions:
        raise RetrievalError("run_experiment requires at least one condition")
    for q in queries:
        if not kb.has_pair(q.expected_pair_id):
            raise KBError(f"query expects unknown pair_id {q.expected_pair_id!r}")

    rows = []
    pair_acc: dict[str, dict[str, float]] = {}
    for condition in conditions:
        index = build_index(kb, embedder, include_generated=condition)
        hits = 0
        per_pair_hits: dict[str, list[int]] = {}
        for q in queries:
            result = match(index, q.query, embedder)
            correct = int(result.pair_id == q.expected_pair_id)
            hits += correct
            per_pair_hits.setdefault(q.expected_pair_id, []).append(correct)
        rows.append(
            {
                "condition": condition,
                "top1_accuracy": hits / len(queries),
                "n_queries": len(queries),
            }
        )
        for pid, outcomes in per_pair_hits.items():
            pair_acc.setdefault(pid, {})[condition] = sum(outcomes) / len(outcomes)

    baseline = conditions[0]
    per_pair = []
    for pid in sorted(pair_acc):
        for condition in conditions:
            acc = pair_acc[pid][condition]
            per_pair.append(
                {
                    "pair_id": pid,
                    "condition": condition,
                    "accuracy": acc,
                    "delta": acc - pair_acc[pid][baseline],
                }
            )
    return ExperimentResult(rows=rows, per_pair=per_pair)


def write_accuracy_csv(result: ExperimentResult, path: str | Path, run_id: str | None = None) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        if run_id is not None:
            fh.write(f"# run_id={run_id} manifest=manifest.json\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["condition", "top1_accuracy", "n_queries"])
        for row in result.rows:
            writer.writerow([row["condition"], row["top1_accuracy"], row["n_queries"]])
