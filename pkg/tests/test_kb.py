from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqgen.generate import GenerationBatch
from sqgen.kb import (
    GeneratedQuestion,
    IngestError,
    KBError,
    KBFormatError,
    KnowledgeBase,
    QAPair,
    attach_generated,
    ingest_qa_pairs,
    load_kb,
    save_kb,
)
from sqgen.providers import SamplingParams


def _write_jsonl(path, records):
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def _batch(questions, pair_id="p1", mode="context_aware"):
    return GenerationBatch(
        pair_id=pair_id,
        mode=mode,
        requested_count=max(len(questions), 1),
        k_per_call=20,
        raw_responses=["\n".join(questions)] if questions else [],
        questions=questions,
        sampling=SamplingParams(),
        provider_id="mock:test",
    )


# ── ingest ────────────────────────────────────────────────────────────────────


def test_ingest_empty_file_yields_empty_kb(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    kb = ingest_qa_pairs(path)
    assert len(kb) == 0


def test_ingest_two_records_three_questions_each(tmp_path):
    path = tmp_path / "kb.jsonl"
    _write_jsonl(
        path,
        [
            {"answer": "答案一", "questions": ["问一", "问二", "问三"]},
            {"answer": "答案二", "questions": ["问四", "问五", "问六"]},
        ],
    )
    kb = ingest_qa_pairs(path)
    assert len(kb) == 2
    assert [len(p.questions) for p in kb.pairs] == [3, 3]
    assert kb.pairs[0].pair_id == "pair-0001"


def test_ingest_drops_duplicate_questions_with_warning(tmp_path, caplog):
    path = tmp_path / "kb.jsonl"
    _write_jsonl(path, [{"answer": "答", "questions": ["q", "q", "p"]}])
    with caplog.at_level("WARNING"):
        kb = ingest_qa_pairs(path)
    assert kb.pairs[0].questions == ["q", "p"]
    assert any("duplicate" in rec.message for rec in caplog.records)


def test_ingest_normalized_duplicates_collapse(tmp_path):
    path = tmp_path / "kb.jsonl"
    _write_jsonl(path, [{"answer": "答", "questions": ["多久？", "多久?", "几天"]}])
    kb = ingest_qa_pairs(path)
    assert kb.pairs[0].questions == ["多久？", "几天"]


def test_ingest_missing_file():
    with pytest.raises(FileNotFoundError):
        ingest_qa_pairs("/nonexistent/kb.jsonl")


def test_ingest_aggregates_record_errors_with_line_numbers(tmp_path):
    path = tmp_path / "kb.jsonl"
    path.write_text(
        json.dumps({"answer": "", "questions": ["q"]}, ensure_ascii=False)
        + "\n{bad json\n"
        + json.dumps({"answer": "a", "questions": []}, ensure_ascii=False)
        + "\n",
        encoding="utf-8",
    )
    with pytest.raises(IngestError) as exc_info:
        ingest_qa_pairs(path)
    lines = sorted(f.line for f in exc_info.value.failures)
    assert lines == [1, 2, 3]


def test_ingest_preserves_record_order(tmp_path):
    path = tmp_path / "kb.jsonl"
    _write_jsonl(
        path,
        [{"pair_id": f"id{i}", "answer": "a", "questions": [f"q{i}"]} for i in range(5)],
    )
    kb = ingest_qa_pairs(path)
    assert [p.pair_id for p in kb.pairs] == [f"id{i}" for i in range(5)]


def test_ingest_csv_groups_by_pair_id(tmp_path):
    path = tmp_path / "kb.csv"
    path.write_text(
        "pair_id,question,answer,tags\n"
        "p1,问一,答一,a;b\n"
        "p1,问二,答一,\n"
        "p2,问三,答二,\n",
        encoding="utf-8",
    )
    kb = ingest_qa_pairs(path, fmt="csv")
    assert len(kb) == 2
    assert kb.pairs[0].questions == ["问一", "问二"]
    assert kb.pairs[0].tags == ["a", "b"]
    assert kb.pairs[1].answer == "答二"


def test_ingest_csv_conflicting_answers_is_record_error(tmp_path):
    path = tmp_path / "kb.csv"
    path.write_text(
        "pair_id,question,answer\np1,问一,答一\np1,问二,不同答案\n", encoding="utf-8"
    )
    with pytest.raises(IngestError):
        ingest_qa_pairs(path, fmt="csv")


def test_ingest_csv_requires_columns(tmp_path):
    path = tmp_path / "kb.csv"
    path.write_text("foo,bar\n1,2\n", encoding="utf-8")
    with pytest.raises(KBFormatError):
        ingest_qa_pairs(path, fmt="csv")


# ── save / load ───────────────────────────────────────────────────────────────


def test_save_load_round_trip(two_pair_kb, tmp_path):
    path = tmp_path / "kb.jsonl"
    save_kb(two_pair_kb, path)
    loaded = load_kb(path)
    assert loaded == two_pair_kb


def test_save_load_empty_kb_preserves_metadata(tmp_path):
    kb = KnowledgeBase()
    kb.meta.name = "nothing"
    kb.meta.created_at = "2026-01-01T00:00:00Z"
    path = tmp_path / "kb.jsonl"
    save_kb(kb, path)
    loaded = load_kb(path)
    assert loaded == kb
    assert loaded.meta.name == "nothing"


def test_load_truncated_file_reports_byte_offset(two_pair_kb, tmp_path):
    path = tmp_path / "kb.jsonl"
    save_kb(two_pair_kb, path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 30])
    with pytest.raises(KBFormatError) as exc_info:
        load_kb(path)
    assert exc_info.value.byte_offset is not None
    assert exc_info.value.byte_offset > 0
    assert "byte offset" in str(exc_info.value)


def test_load_version_mismatch(tmp_path):
    path = tmp_path / "kb.jsonl"
    path.write_text('{"kb_meta": {"name": "x", "version": "99"}}\n', encoding="utf-8")
    with pytest.raises(KBFormatError, match="version"):
        load_kb(path)


def test_load_headerless_record_file(tmp_path):
    path = tmp_path / "kb.jsonl"
    _write_jsonl(path, [{"pair_id": "p1", "answer": "a", "questions": ["q"]}])
    kb = load_kb(path)
    assert len(kb) == 1


def test_round_trip_keeps_generated_provenance(two_pair_kb, tmp_path):
    kb = attach_generated(two_pair_kb, "p1", _batch(["新问题一", "新问题二"]))
    path = tmp_path / "kb.jsonl"
    save_kb(kb, path)
    loaded = load_kb(path)
    assert loaded == kb
    g = loaded.pair("p1").generated[1]
    assert (g.batch_index, g.position, g.pair_id) == (0, 1, "p1")


# ── attach_generated ──────────────────────────────────────────────────────────


def test_attach_appends_candidates(two_pair_kb):
    kb = attach_generated(two_pair_kb, "p1", _batch(["新一", "新二", "新三"]))
    pair = kb.pair("p1")
    assert len(pair.generated) == 3
    assert all(g.status == "candidate" for g in pair.generated)
    assert pair.questions == two_pair_kb.pair("p1").questions


def test_attach_skips_source_question_verbatim(two_pair_kb):
    kb = attach_generated(two_pair_kb, "p1", _batch(["证明开具时间要多久？", "新问法"]))
    assert [g.text for g in kb.pair("p1").generated] == ["新问法"]


def test_attach_unknown_pair_leaves_kb_unchanged(two_pair_kb):
    with pytest.raises(KBError):
        attach_generated(two_pair_kb, "nope", _batch(["x"]))
    assert len(two_pair_kb.pair("p1").generated) == 0


def test_attach_does_not_touch_other_pairs(two_pair_kb):
    kb = attach_generated(two_pair_kb, "p1", _batch(["新问法"]))
    assert kb.pair("p2") == two_pair_kb.pair("p2")


def test_attach_skips_existing_generated_duplicates(two_pair_kb):
    kb = attach_generated(two_pair_kb, "p1", _batch(["新问法"]))
    kb = attach_generated(kb, "p1", _batch(["新问法", "另一个"]))
    assert [g.text for g in kb.pair("p1").generated] == ["新问法", "另一个"]


def test_generated_status_transitions():
    g = GeneratedQuestion(text="q", mode="one_to_one")
    accepted = g.with_status("accepted")
    assert accepted.status == "accepted"
    with pytest.raises(ValueError):
        accepted.with_status("rejected")
    with pytest.raises(ValueError):
        g.with_status("candidate")


# ── property tests ────────────────────────────────────────────────────────────

_question = st.text(
    alphabet=st.sampled_from("abc问还款证明多久天好吗？ "), min_size=1, max_size=8
).filter(lambda s: s.strip())


@st.composite
def _kbs(draw):
    from sqgen.normalize import normalize_text

    n_pairs = draw(st.integers(min_value=1, max_value=4))
    pairs = []
    for i in range(n_pairs):
        questions = []
        for _ in range(draw(st.integers(min_value=1, max_value=4))):
            q = draw(_question)
            if normalize_text(q) not in {normalize_text(x) for x in questions}:
                questions.append(q)
        if not questions:
            questions = [f"问题{i}"]
        pairs.append(QAPair(pair_id=f"p{i}", answer=draw(_question), questions=questions))
    return KnowledgeBase(pairs=pairs)


@given(_kbs())
@settings(max_examples=40, deadline=None)
def test_property_save_load_identity(kb):
    import tempfile
    from pathlib import Path

    kb.validate()
    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "kb.jsonl"
        save_kb(kb, path)
        assert load_kb(path) == kb


@given(_kbs(), st.lists(_question, min_size=0, max_size=5))
@settings(max_examples=40, deadline=None)
def test_property_attach_preserves_invariants(kb, texts):
    from sqgen.generate import dedup

    target = kb.pairs[0].pair_id
    unique = dedup(texts)
    if not unique:
        return
    before_counts = {p.pair_id: len(p.questions) + len(p.generated) for p in kb.pairs}
    new_kb = attach_generated(kb, target, _batch(unique, pair_id=target))
    new_kb.validate()
    for p in new_kb.pairs:
        total = len(p.questions) + len(p.generated)
        assert total >= before_counts[p.pair_id]
        if p.pair_id != target:
            assert total == before_counts[p.pair_id]
