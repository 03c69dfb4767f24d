from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqgen.generate import (
    BatchGenerationError,
    GenerationBatch,
    ParseError,
    dedup,
    generate_batch,
    generate_one_to_one,
    parse_multi_question,
)
from sqgen.kb import QAPair
from sqgen.providers import FailingProvider, MockProvider, SamplingParams, ScriptEntry


def _pair(pair_id="p1"):
    return QAPair(pair_id=pair_id, answer="答案。", questions=["原始问题？"])


def _numbered(lines):
    return "\n".join(f"{i}. {q}" for i, q in enumerate(lines, 1))


# ── parse_multi_question ──────────────────────────────────────────────────────


def test_parse_numbered_lines():
    assert parse_multi_question("1. A\n2. B\n3. C", 3) == ["A", "B", "C"]


def test_parse_marker_variants():
    raw = "1、甲\n2) 乙\n3）丙\n- 丁\n① 戊\n4．己"
    assert parse_multi_question(raw, 6) == ["甲", "乙", "丙", "丁", "戊", "己"]


def test_parse_unnumbered_lines():
    assert parse_multi_question("A\nB", 3) == ["A", "B"]


def test_parse_deviation_logged_not_error(caplog):
    with caplog.at_level("WARNING"):
        items = parse_multi_question("A\nB", 3)
    assert items == ["A", "B"]
    assert any("expected 3" in rec.message for rec in caplog.records)


def test_parse_blank_is_error():
    with pytest.raises(ParseError):
        parse_multi_question("   \n\n", 5)


def test_parse_drops_empty_lines():
    assert parse_multi_question("1. A\n\n\n2. B", 2) == ["A", "B"]


# ── dedup ─────────────────────────────────────────────────────────────────────


def test_dedup_latin_case_and_space():
    assert dedup(["A", "a ", "B"]) == ["A", "B"]


def test_dedup_source_exclusion():
    assert dedup(["Q"], "Q") == []


def test_dedup_empty():
    assert dedup([]) == []


def test_dedup_fullwidth_collapse():
    assert dedup(["多久？", "多久?"]) == ["多久？"]


@given(st.lists(st.text(min_size=1, max_size=6), max_size=12))
@settings(max_examples=60, deadline=None)
def test_dedup_idempotent(items):
    once = dedup(items)
    assert dedup(once) == once


# ── generate_one_to_one ───────────────────────────────────────────────────────


def test_one_to_one_dedups_scripted_outputs():
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=["A", "B", "A"])])
    batch = generate_one_to_one(provider, "源问题", 3)
    assert batch.questions == ["A", "B"]
    assert batch.underfilled


def test_one_to_one_single_call():
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=["A"])])
    batch = generate_one_to_one(provider, "源问题", 1)
    assert batch.questions == ["A"]
    assert not batch.underfilled
    assert batch.k_per_call == 1


def test_one_to_one_all_timeouts_is_batch_error():
    provider = FailingProvider("timeout after 60s")
    with pytest.raises(BatchGenerationError) as exc_info:
        generate_one_to_one(provider, "源问题", 5)
    assert len(exc_info.value.failures) == 5
    assert all("timeout" in f for f in exc_info.value.failures)


def test_one_to_one_partial_failures_recorded():
    calls = {"n": 0}

    class Flaky(MockProvider):
        def complete(self, prompt, params):
            calls["n"] += 1
            if calls["n"] % 2 == 0:
                raise RuntimeError("boom")
            return f"问法{calls['n']}"

    provider = Flaky([])
    batch = generate_one_to_one(provider, "源", 4)
    assert len(batch.questions) == 2
    assert len(batch.failures) == 2


def test_one_to_one_excludes_source():
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=["源问题", "新问题"])])
    batch = generate_one_to_one(provider, "源问题", 2)
    assert batch.questions == ["新问题"]


# ── generate_batch ────────────────────────────────────────────────────────────


def test_batch_twenty_in_one_call():
    lines = [f"相似问法{i}" for i in range(1, 21)]
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=[_numbered(lines)])])
    batch = generate_batch(provider, _pair(), 20, "context_aware", k_per_call=20)
    assert batch.questions == lines
    assert len(provider.call_log) == 1
    assert not batch.underfilled


def test_batch_hundred_needs_five_calls():
    responses = [
        _numbered([f"第{w}批问法{i}" for i in range(1, 21)]) for w in range(1, 6)
    ]
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=responses)])
    batch = generate_batch(provider, _pair(), 100, "context_aware", k_per_call=20)
    assert len(batch.questions) == 100
    assert len(provider.call_log) == 5
    assert len(set(batch.questions)) == 100


def test_batch_saturation_underfills_after_budget():
    same = _numbered(["甲", "乙", "丙"])
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=[same])])
    batch = generate_batch(provider, _pair(), 5, "context_aware", k_per_call=5)
    assert batch.questions == ["甲", "乙", "丙"]
    assert batch.underfilled
    assert len(provider.call_log) == 3  # retry budget: 3 x ceil(5/5)


def test_batch_intention_requires_answer_in_prompt():
    lines = _numbered(["新问法"])
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=[lines])])
    generate_batch(provider, _pair(), 1, "intention_enhanced", k_per_call=1)
    prompt = provider.call_log[0][0]
    assert "答案。" in prompt
    assert "原始问题？" in prompt


def test_batch_mode_validation():
    provider = MockProvider([])
    with pytest.raises(ValueError):
        generate_batch(provider, _pair(), 5, "one_to_one")


def test_batch_source_question_never_in_output():
    lines = _numbered(["原始问题？", "新问法一", "新问法二"])
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=[lines])])
    batch = generate_batch(provider, _pair(), 2, "context_aware", k_per_call=3)
    assert batch.questions == ["新问法一", "新问法二"]


def test_batch_all_calls_failed_raises():
    provider = FailingProvider()
    with pytest.raises(BatchGenerationError):
        generate_batch(provider, _pair(), 10, "context_aware", k_per_call=5)
    assert provider.call_count == 6  # 3 x ceil(10/5)


def test_batch_reproducible_call_for_call():
    lines = [_numbered([f"问法{i}" for i in range(1, 21)])]

    def run():
        provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=list(lines))])
        batch = generate_batch(provider, _pair(), 20, "context_aware", k_per_call=20,
                               params=SamplingParams(seed=9))
        return batch.to_record(), [c[0] for c in provider.call_log]

    first, log_first = run()
    second, log_second = run()
    assert first == second
    assert log_first == log_second


def test_parallel_wave_matches_sequential_output():
    responses = [_numbered([f"第{w}批问{i}" for i in range(1, 6)]) for w in range(1, 5)]

    def run(max_parallel):
        provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=list(responses))])
        return generate_one_to_one_like(provider, max_parallel)

    def generate_one_to_one_like(provider, max_parallel):
        return generate_batch(
            provider, _pair(), 20, "context_aware", k_per_call=5, max_parallel=max_parallel
        ).questions

    assert run(1) == run(4)


def test_batch_record_excludes_timing():
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=[_numbered(["新问"]) ])])
    batch = generate_batch(provider, _pair(), 1, "context_aware", k_per_call=1)
    record = batch.to_record()
    assert "duration_s" not in record
    assert record["questions"] == ["新问"]


def test_batch_invariant_no_duplicates():
    with pytest.raises(ValueError):
        GenerationBatch(
            pair_id="p",
            mode="context_aware",
            requested_count=3,
            k_per_call=3,
            raw_responses=[],
            questions=["同", "同"],
            sampling=SamplingParams(),
            provider_id="mock:x",
        )


def test_batch_invariant_not_over_requested():
    with pytest.raises(ValueError):
        GenerationBatch(
            pair_id="p",
            mode="context_aware",
            requested_count=1,
            k_per_call=3,
            raw_responses=[],
            questions=["甲", "乙"],
            sampling=SamplingParams(),
            provider_id="mock:x",
        )
