"""Instruction templates for the three generation modes.

The instruction strings are the canonical fine-tuning prompts; tests compare
rendered output byte-for-byte against golden fixtures, so the patterns here
must never be reformatted.
"""

from __future__ import annotations

from dataclasses import dataclass

from .normalize import is_blank

ONE_TO_ONE = "one_to_one"
CONTEXT_AWARE = "context_aware"
INTENTION_ENHANCED = "intention_enhanced"

TEMPLATE_IDS = (ONE_TO_ONE, CONTEXT_AWARE, INTENTION_ENHANCED)
BATCH_TEMPLATE_IDS = (CONTEXT_AWARE, INTENTION_ENHANCED)


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction pattern plus the joining rule for its response targets."""

    template_id: str
    instruction_pattern: str
    response_pattern: str  # "single" or "numbered_lines"


TEMPLATES: dict[str, PromptTemplate] = {
    ONE_TO_ONE: PromptTemplate(
        template_id=ONE_TO_ONE,
        instruction_pattern="将输入的句子改写为保持相同意义但表述不同的新句子。",
        response_pattern="single",
    ),
    CONTEXT_AWARE: PromptTemplate(
        template_id=CONTEXT_AWARE,
        instruction_pattern="帮我生成{K}条与{question}相似的问句。",
        response_pattern="numbered_lines",
    ),
    INTENTION_ENHANCED: PromptTemplate(
        template_id=INTENTION_ENHANCED,
        instruction_pattern="帮我根据问题{question}和答案{answer}，生成{K}个不同且意思相近的问题。",
        response_pattern="numbered_lines",
    ),
}


class PromptError(ValueError):
    pass


def render_prompt(template_id: str, question: str, answer: str | None = None, k: int | None = None) -> str:
    """Substitute slots into the instruction for one template.

    K is rendered as a decimal numeral; no other characters are altered.
    one_to_one takes no slots (the question travels in the input field), and
    intention_enhanced requires the answer.
    """
    if template_id not in TEMPLATES:
        raise PromptError(f"unknown template: {template_id!r}")
    if is_blank(question):
        raise PromptError("question must be non-empty")

    template = TEMPLATES[template_id]
    if template_id == ONE_TO_ONE:
        return template.instruction_pattern

    if k is None or k < 1:
        raise PromptError(f"{template_id} requires K >= 1, got {k!r}")
    if template_id == INTENTION_ENHANCED:
        if answer is None or is_blank(answer):
            raise PromptError("intention_enhanced requires an answer")
        return template.instruction_pattern.format(K=k, question=question, answer=answer)
    return template.instruction_pattern.format(K=k, question=question)


def join_numbered(questions: list[str]) -> str:
    """Join target questions as numbered lines: '1. q' per line."""
    return "\n".join(f"{i}. {q}" for i, q in enumerate(questions, start=1))


def build_generation_prompt(
    mode: str, question: str, answer: str | None = None, k: int | None = None
) -> str:
    """Full completion prompt for a provider call.

    Batch modes carry the question inside the instruction; one_to_one appends
    the input sentence on its own line, mirroring the instruction/input layout
    of the fine-tuning records.
    """
    instruction = render_prompt(mode, question, answer=answer, k=k)
    if mode == ONE_TO_ONE:
        return f"{instruction}\n{question}"
    return instruction
