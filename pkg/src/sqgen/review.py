"""Expert-review workflow state: sessions, marks, and a durable event log.

A session snapshots every candidate question of one generation run into a
seed-shuffled queue. Marks are append-only events persisted to a JSONL log
before they are acknowledged, so replaying the log after a restart
reconstructs every session's statistics exactly.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .kb import KnowledgeBase
from .metrics import acceptance_ratio

log = logging.getLogger(__name__)

VERDICTS = ("accept", "reject")


class ReviewError(Exception):
    pass


class UnknownRunError(ReviewError):
    pass


class EmptyRunError(ReviewError):
    pass


class UnknownSessionError(ReviewError):
    pass


class UnknownItemError(ReviewError):
    pass


class DuplicateMarkError(ReviewError):
    pass


@dataclass(frozen=True)
class ReviewItem:
    item_id: str
    pair_id: str
    text: str
    source_question: str
    answer: str


@dataclass(frozen=True)
class ReviewMark:
    item_id: str
    verdict: str
    note: str | None
    ts: str


@dataclass
class ReviewSession:
    session_id: str
    run_id: str
    reviewer_id: str
    seed: int
    queue: list[ReviewItem]
    created_at: str
    marks: dict[str, ReviewMark] = field(default_factory=dict)

    def item(self, item_id: str) -> ReviewItem:
        for it in self.queue:
            if it.item_id == item_id:
                return it
        raise UnknownItemError(f"item {item_id!r} not in session {self.session_id!r}")


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class ReviewStore:
    """Session registry over a runs directory.

    Candidates come from runs/<run_id>/batches.jsonl; sessions and marks are
    persisted to sessions.jsonl and marks.jsonl next to it. Construction
    replays both logs, so a restarted store reports identical statistics.
    """

    def __init__(self, runs_dir: str | Path, kb: KnowledgeBase | None = None):
        self.runs_dir = Path(runs_dir)
        self.kb = kb
        self.sessions: dict[str, ReviewSession] = {}
        self._lock = threading.Lock()
        self._replay_logs()

    # ── run candidates ───────────────────────────────────────────────────────

    def _run_dir(self, run_id: str) -> Path:
        return self.runs_dir / run_id

    def _collect_candidates(self, run_id: str) -> list[tuple[str, str]]:
        batches_path = self._run_dir(run_id) / "batches.jsonl"
        if not batches_path.exists():
            raise UnknownRunError(f"run {run_id!r} not found under {self.runs_dir}")
        candidates: list[tuple[str, str]] = []
        with batches_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                for text in record.get("questions", []):
                    candidates.append((record.get("pair_id", ""), text))
        return candidates

    def _pair_context(self, pair_id: str) -> tuple[str, str]:
        if self.kb is not None and self.kb.has_pair(pair_id):
            pair = self.kb.pair(pair_id)
            return pair.source_question, pair.answer
        log.warning("pair %s not found in KB; review card will lack context", pair_id)
        return "", ""

    # ── session lifecycle ────────────────────────────────────────────────────

    def _build_session(
        self, session_id: str, run_id: str, reviewer_id: str, seed: int, created_at: str
    ) -> ReviewSession:
        candidates = self._collect_candidates(run_id)
        if not candidates:
            raise EmptyRunError(f"run {run_id!r} has no candidate questions")
        items = []
        for idx, (pair_id, text) in enumerate(candidates):
            source_question, answer = self._pair_context(pair_id)
            items.append(
                ReviewItem(
                    item_id=f"it-{idx:04d}",
                    pair_id=pair_id,
                    text=text,
                    source_question=source_question,
                    answer=answer,
                )
            )
        random.Random(seed).shuffle(items)
        return ReviewSession(
            session_id=session_id,
            run_id=run_id,
            reviewer_id=reviewer_id,
            seed=seed,
            queue=items,
            created_at=created_at,
        )

    def create_session(self, run_id: str, reviewer_id: str, seed: int) -> ReviewSession:
        with self._lock:
            existing = sum(1 for s in self.sessions.values() if s.run_id == run_id)
            session_id = f"{run_id}-s{existing + 1:03d}"
            session = self._build_session(session_id, run_id, reviewer_id, seed, _utcnow())
            self._append_log(
                self._run_dir(run_id) / "sessions.jsonl",
                {
                    "session_id": session.session_id,
                    "run_id": run_id,
                    "reviewer_id": reviewer_id,
                    "seed": seed,
                    "created_at": session.created_at,
                },
            )
            self.sessions[session_id] = session
            return session

    def _get(self, session_id: str) -> ReviewSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"unknown session {session_id!r}")
        return session

    # ── review operations ────────────────────────────────────────────────────

    def next_item(self, session_id: str) -> ReviewItem | None:
        """First unmarked item in queue order, or None when the session is done."""
        session = self._get(session_id)
        for item in session.queue:
            if item.item_id not in session.marks:
                return item
        return None

    def item_position(self, session_id: str, item_id: str) -> int:
        session = self._get(session_id)
        for idx, item in enumerate(session.queue):
            if item.item_id == item_id:
                return idx + 1
        raise UnknownItemError(f"item {item_id!r} not in session {session_id!r}")

    def submit_mark(
        self, session_id: str, item_id: str, verdict: str, note: str | None = None
    ) -> dict:
        if verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {verdict!r}")
        with self._lock:
            session = self._get(session_id)
            session.item(item_id)  # raises UnknownItemError
            if item_id in session.marks:
                raise DuplicateMarkError(f"item {item_id!r} already marked")
            mark = ReviewMark(item_id=item_id, verdict=verdict, note=note, ts=_utcnow())
            # Durability before acknowledgment: the log line lands on disk
            # before the in-memory state or caller sees the mark.
            self._append_log(
                self._run_dir(session.run_id) / "marks.jsonl",
                {
                    "session_id": session_id,
                    "item_id": item_id,
                    "verdict": verdict,
                    "note": note,
                    "ts": mark.ts,
                },
            )
            session.marks[item_id] = mark
            return self._stats(session)

    def session_stats(self, session_id: str) -> dict:
        return self._stats(self._get(session_id))

    @staticmethod
    def _stats(session: ReviewSession) -> dict:
        marks = list(session.marks.values())
        accepted = sum(1 for m in marks if m.verdict == "accept")
        rejected = len(marks) - accepted
        ratio = acceptance_ratio(marks) if marks else None
        return {
            "session_id": session.session_id,
            "total": len(session.queue),
            "marked": len(marks),
            "accepted": accepted,
            "rejected": rejected,
            "acceptance_ratio": ratio,
            "remaining": len(session.queue) - len(marks),
        }

    # ── persistence ──────────────────────────────────────────────────────────

    @staticmethod
    def _append_log(path: Path, record: dict) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _replay_logs(self) -> None:
        if not self.runs_dir.exists():
            return
        for run_dir in sorted(p for p in self.runs_dir.iterdir() if p.is_dir()):
            sessions_path = run_dir / "sessions.jsonl"
            if not sessions_path.exists():
                continue
            with sessions_path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    try:
                        session = self._build_session(
                            rec["session_id"],
                            rec["run_id"],
                            rec["reviewer_id"],
                            rec["seed"],
                            rec.get("created_at", ""),
                        )
                    except (UnknownRunError, EmptyRunError) as exc:
                        log.warning("skipping stale session %s: %s", rec.get("session_id"), exc)
                        continue
                    self.sessions[session.session_id] = session
            marks_path = run_dir / "marks.jsonl"
            if not marks_path.exists():
                continue
            with marks_path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    session = self.sessions.get(rec.get("session_id", ""))
                    if session is None:
                        continue
                    session.marks[rec["item_id"]] = ReviewMark(
                        item_id=rec["item_id"],
                        verdict=rec["verdict"],
                        note=rec.get("note"),
                        ts=rec.get("ts", ""),
                    )
