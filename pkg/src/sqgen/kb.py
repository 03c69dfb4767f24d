"""Knowledge-base data model, ingestion, and JSONL persistence.

A knowledge base is an ordered list of QA pairs. Each pair keeps the answer,
the human-curated questions (the first one is the canonical source question
used for generation), and any machine-generated candidates attached later.

Persistence is line-oriented JSON: a metadata header line followed by one
pair record per line, UTF-8 without BOM.

Mutating operations return a new KnowledgeBase value and leave their input
untouched; concurrent readers of a KB value are safe, and writers must be
serialized externally (single-writer contract).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from .normalize import is_blank, normalize_text

if TYPE_CHECKING:  # pragma: no cover
    from .generate import GenerationBatch

log = logging.getLogger(__name__)

FORMAT_VERSION = "1"

GENERATION_MODES = ("one_to_one", "context_aware", "intention_enhanced")
GENERATED_STATUSES = ("candidate", "accepted", "rejected")


class KBError(Exception):
    """Base error for knowledge-base operations."""


class KBFormatError(KBError):
    """Raised when a KB file cannot be parsed or has an incompatible version."""

    def __init__(self, message: str, *, line: int | None = None, byte_offset: int | None = None):
        super().__init__(message)
        self.line = line
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class RecordError:
    line: int
    reason: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.reason}"


class IngestError(KBError):
    """Aggregated record-level failures from an ingest run."""

    def __init__(self, failures: list[RecordError]):
        self.failures = failures
        summary = "; ".join(str(f) for f in failures[:5])
        more = f" (+{len(failures) - 5} more)" if len(failures) > 5 else ""
        super().__init__(f"{len(failures)} invalid record(s): {summary}{more}")


@dataclass(frozen=True)
class GeneratedQuestion:
    """One machine-generated candidate attached to a QA pair."""

    text: str
    mode: str
    status: str = "candidate"
    pair_id: str = ""
    batch_index: int = 0
    position: int = 0

    def __post_init__(self) -> None:
        if is_blank(self.text):
            raise ValueError("generated question text must be non-empty")
        if self.mode not in GENERATION_MODES:
            raise ValueError(f"unknown generation mode: {self.mode!r}")
        if self.status not in GENERATED_STATUSES:
            raise ValueError(f"unknown status: {self.status!r}")

    def with_status(self, status: str) -> "GeneratedQuestion":
        """Transition candidate -> accepted | rejected; anything else is invalid."""
        if self.status != "candidate":
            raise ValueError(f"cannot move from {self.status!r} to {status!r}")
        if status not in ("accepted", "rejected"):
            raise ValueError(f"invalid target status: {status!r}")
        return replace(self, status=status)


@dataclass
class QAPair:
    """An answer plus its set of semantically equivalent questions."""

    pair_id: str
    answer: str
    questions: list[str]
    tags: list[str] = field(default_factory=list)
    generated: list[GeneratedQuestion] = field(default_factory=list)

    def validate(self) -> None:
        if is_blank(self.answer):
            raise KBError(f"pair {self.pair_id!r}: answer is empty")
        if not self.questions:
            raise KBError(f"pair {self.pair_id!r}: question list is empty")
        seen: set[str] = set()
        for q in self.questions:
            if is_blank(q):
                raise KBError(f"pair {self.pair_id!r}: blank question")
            key = normalize_text(q)
            if key in seen:
                raise KBError(f"pair {self.pair_id!r}: duplicate question {q!r}")
            seen.add(key)

    @property
    def source_question(self) -> str:
        return self.questions[0]


@dataclass
class KBMeta:
    name: str = "kb"
    created_at: str = ""
    version: str = FORMAT_VERSION


@dataclass
class KnowledgeBase:
    pairs: list[QAPair] = field(default_factory=list)
    meta: KBMeta = field(default_factory=KBMeta)

    def validate(self) -> None:
        seen: set[str] = set()
        for pair in self.pairs:
            if pair.pair_id in seen:
                raise KBError(f"duplicate pair_id {pair.pair_id!r}")
            seen.add(pair.pair_id)
            pair.validate()

    def pair(self, pair_id: str) -> QAPair:
        for p in self.pairs:
            if p.pair_id == pair_id:
                return p
        raise KBError(f"unknown pair_id {pair_id!r}")

    def has_pair(self, pair_id: str) -> bool:
        return any(p.pair_id == pair_id for p in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _dedup_questions(questions: list[str], pair_id: str) -> list[str]:
    """Drop exact/normalized duplicates, keeping first occurrence."""
    out: list[str] = []
    seen: set[str] = set()
    for q in questions:
        key = normalize_text(q)
        if key in seen:
            log.warning("pair %s: dropping duplicate question %r", pair_id, q)
            continue
        seen.add(key)
        out.append(q)
    return out


def _pair_from_record(
    record: dict, line_no: int, failures: list[RecordError], default_id: str
) -> QAPair | None:
    answer = record.get("answer")
    questions = record.get("questions")
    if not isinstance(answer, str) or is_blank(answer):
        failures.append(RecordError(line_no, "missing or empty answer"))
        return None
    if not isinstance(questions, list) or not questions:
        failures.append(RecordError(line_no, "missing or empty question list"))
        return None
    if not all(isinstance(q, str) for q in questions):
        failures.append(RecordError(line_no, "questions must be strings"))
        return None
    if any(is_blank(q) for q in questions):
        failures.append(RecordError(line_no, "blank question"))
        return None
    pair_id = record.get("pair_id") or default_id
    tags = record.get("tags") or []
    if not isinstance(tags, list):
        failures.append(RecordError(line_no, "tags must be a list"))
        return None
    generated: list[GeneratedQuestion] = []
    for g in record.get("generated") or []:
        try:
            generated.append(
                GeneratedQuestion(
                    text=g["text"],
                    mode=g["mode"],
                    status=g.get("status", "candidate"),
                    pair_id=g.get("pair_id", pair_id),
                    batch_index=g.get("batch_index", 0),
                    position=g.get("position", 0),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            failures.append(RecordError(line_no, f"bad generated entry: {exc}"))
            return None
    return QAPair(
        pair_id=pair_id,
        answer=answer,
        questions=_dedup_questions(list(questions), pair_id),
        tags=[str(t) for t in tags],
        generated=generated,
    )


def _ingest_jsonl(path: Path) -> KnowledgeBase:
    pairs: list[QAPair] = []
    failures: list[RecordError] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                failures.append(RecordError(line_no, f"malformed JSON: {exc.msg}"))
                continue
            if not isinstance(record, dict):
                failures.append(RecordError(line_no, "record is not an object"))
                continue
            pair = _pair_from_record(record, line_no, failures, f"pair-{len(pairs) + 1:04d}")
            if pair is not None:
                pairs.append(pair)
    if failures:
        raise IngestError(failures)
    return KnowledgeBase(pairs=pairs, meta=KBMeta(name=path.stem, created_at=_utcnow()))


def _ingest_csv(path: Path) -> KnowledgeBase:
    """CSV with header columns question, answer and optional pair_id, tags.

    Rows sharing a pair_id merge into one pair; without a pair_id column each
    row becomes its own single-question pair. Tags are ';'-separated.
    """
    failures: list[RecordError] = []
    order: list[str] = []
    by_id: dict[str, QAPair] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"question", "answer"} <= set(reader.fieldnames):
            raise KBFormatError("CSV must have 'question' and 'answer' columns", line=1)
        for line_no, row in enumerate(reader, start=2):
            question = (row.get("question") or "").strip()
            answer = (row.get("answer") or "").strip()
            if not answer:
                failures.append(RecordError(line_no, "missing or empty answer"))
                continue
            if not question:
                failures.append(RecordError(line_no, "missing or empty question"))
                continue
            pair_id = (row.get("pair_id") or "").strip() or f"pair-{len(order) + 1:04d}"
            tags = [t for t in (row.get("tags") or "").split(";") if t]
            if pair_id in by_id:
                existing = by_id[pair_id]
                if existing.answer != answer:
                    failures.append(
                        RecordError(line_no, f"pair {pair_id!r}: conflicting answers")
                    )
                    continue
                existing.questions.append(question)
            else:
                order.append(pair_id)
                by_id[pair_id] = QAPair(pair_id=pair_id, answer=answer, questions=[question], tags=tags)
    if failures:
        raise IngestError(failures)
    pairs = [by_id[pid] for pid in order]
    for pair in pairs:
        pair.questions = _dedup_questions(pair.questions, pair.pair_id)
    return KnowledgeBase(pairs=pairs, meta=KBMeta(name=path.stem, created_at=_utcnow()))


def ingest_qa_pairs(path: str | Path, fmt: str = "jsonl") -> KnowledgeBase:
    """Read raw QA records into a validated KnowledgeBase.

    Record order is preserved; duplicate questions within a pair are dropped
    with a warning. Any invalid record fails the whole ingest with an
    IngestError listing every offending line.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if fmt == "jsonl":
        kb = _ingest_jsonl(path)
    elif fmt == "csv":
        kb = _ingest_csv(path)
    else:
        raise ValueError(f"unknown ingest format: {fmt!r}")
    kb.validate()
    return kb


def _generated_to_record(g: GeneratedQuestion) -> dict:
    return {
        "text": g.text,
        "mode": g.mode,
        "status": g.status,
        "pair_id": g.pair_id,
        "batch_index": g.batch_index,
        "position": g.position,
    }


def pair_to_record(pair: QAPair) -> dict:
    return {
        "pair_id": pair.pair_id,
        "answer": pair.answer,
        "questions": list(pair.questions),
        "tags": list(pair.tags),
        "generated": [_generated_to_record(g) for g in pair.generated],
    }


def save_kb(kb: KnowledgeBase, path: str | Path) -> None:
    """Write the KB as a metadata header line plus one pair record per line."""
    path = Path(path)
    header = {
        "kb_meta": {
            "name": kb.meta.name,
            "created_at": kb.meta.created_at,
            "version": kb.meta.version,
        }
    }
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for pair in kb.pairs:
            fh.write(json.dumps(pair_to_record(pair), ensure_ascii=False) + "\n")


def load_kb(path: str | Path) -> KnowledgeBase:
    """Inverse of save_kb; also accepts plain record files without a header."""
    path = Path(path)
    pairs: list[QAPair] = []
    meta = KBMeta()
    byte_offset = 0
    with path.open("rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if stripped:
                try:
                    record = json.loads(stripped.decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    raise KBFormatError(
                        f"unparseable KB line {line_no} at byte offset {byte_offset}: {exc}",
                        line=line_no,
                        byte_offset=byte_offset,
                    ) from exc
                if line_no == 1 and isinstance(record, dict) and "kb_meta" in record:
                    m = record["kb_meta"]
                    meta = KBMeta(
                        name=m.get("name", "kb"),
                        created_at=m.get("created_at", ""),
                        version=str(m.get("version", FORMAT_VERSION)),
                    )
                    if meta.version != FORMAT_VERSION:
                        raise KBFormatError(
                            f"KB format version {meta.version!r} not supported "
                            f"(tool version {FORMAT_VERSION!r})",
                            line=line_no,
                        )
                else:
                    failures: list[RecordError] = []
                    pair = _pair_from_record(
                        record, line_no, failures, f"pair-{len(pairs) + 1:04d}"
                    )
                    if failures or pair is None:
                        reason = failures[0].reason if failures else "invalid record"
                        raise KBFormatError(
                            f"invalid KB record on line {line_no} "
                            f"at byte offset {byte_offset}: {reason}",
                            line=line_no,
                            byte_offset=byte_offset,
                        )
                    pairs.append(pair)
            byte_offset += len(raw)
    kb = KnowledgeBase(pairs=pairs, meta=meta)
    kb.validate()
    return kb


def attach_generated(kb: KnowledgeBase, pair_id: str, batch: "GenerationBatch") -> KnowledgeBase:
    """Return a new KB with the batch's questions appended to one pair.

    Appended items get status=candidate. Items whose normalized text matches
    an existing question (source or previously attached) of that pair are
    skipped. Other pairs are shared unchanged.
    """
    target = kb.pair(pair_id)  # raises KBError for unknown ids
    existing_keys = {normalize_text(q) for q in target.questions}
    existing_keys.update(normalize_text(g.text) for g in target.generated)

    batch_index = max((g.batch_index for g in target.generated), default=-1) + 1
    new_items: list[GeneratedQuestion] = []
    for position, text in enumerate(batch.questions):
        key = normalize_text(text)
        if key in existing_keys:
            log.info("pair %s: skipping duplicate generated question %r", pair_id, text)
            continue
        existing_keys.add(key)
        new_items.append(
            GeneratedQuestion(
                text=text,
                mode=batch.mode,
                status="candidate",
                pair_id=pair_id,
                batch_index=batch_index,
                position=position,
            )
        )

    updated = replace(
        target,
        questions=list(target.questions),
        tags=list(target.tags),
        generated=list(target.generated) + new_items,
    )
    new_pairs = [updated if p.pair_id == pair_id else p for p in kb.pairs]
    return KnowledgeBase(pairs=new_pairs, meta=kb.meta)


def iter_questions(kb: KnowledgeBase, include_generated: str = "none") -> Iterable[tuple[str, str]]:
    """Yield (question, pair_id) in pair order, then question order.

    include_generated: 'none' for source questions only, 'accepted_only' to
    add accepted candidates, 'all' to add every generated question.
    """
    if include_generated not in ("none", "accepted_only", "all"):
        raise ValueError(f"unknown include_generated mode: {include_generated!r}")
    for pair in kb.pairs:
        for q in pair.questions:
            yield q, pair.pair_id
        if include_generated == "none":
            continue
        for g in pair.generated:
            if include_generated == "all" or g.status == "accepted":
                yield g.text, pair.pair_id
