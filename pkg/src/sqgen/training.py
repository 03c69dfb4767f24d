"""Fine-tuning sample construction and JSONL export.

Two layouts are produced from a knowledge base:

* one_to_one: ordered question pairs (q_i, q_j), i != j, one target per sample.
* batch (context_aware / intention_enhanced): one input question plus L
  distinct target questions from the same pair, rendered as numbered lines.
  intention_enhanced additionally embeds the pair's answer in the instruction.

Sampling is fully determined by the seed so an export can be reproduced.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

from .kb import KnowledgeBase, QAPair
from .prompts import (
    BATCH_TEMPLATE_IDS,
    INTENTION_ENHANCED,
    ONE_TO_ONE,
    TEMPLATE_IDS,
    join_numbered,
    render_prompt,
)

log = logging.getLogger(__name__)

DEFAULT_TARGETS_PER_SAMPLE = 20
DEFAULT_SAMPLES_PER_PAIR = 30


class NoUsablePairsError(ValueError):
    """No pair in the KB has enough questions for the requested layout."""


@dataclass
class TrainingSample:
    instruction: str
    input: str
    output: str
    sample_id: str
    pair_id: str
    paradigm: str
    # Provenance kept for property checks; not exported.
    input_question: str = ""
    targets: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {"instruction": self.instruction, "input": self.input, "output": self.output}


def _one_to_one_samples(
    pair: QAPair, samples_per_pair: int | None, rng: random.Random
) -> list[TrainingSample]:
    qs = pair.questions
    ordered = [(i, j) for i in range(len(qs)) for j in range(len(qs)) if i != j]
    if samples_per_pair is not None and samples_per_pair < len(ordered):
        ordered = rng.sample(ordered, samples_per_pair)
    instruction = render_prompt(ONE_TO_ONE, qs[0])
    samples = []
    for s, (i, j) in enumerate(ordered):
        samples.append(
            TrainingSample(
                instruction=instruction,
                input=qs[i],
                output=qs[j],
                sample_id=f"{pair.pair_id}-{ONE_TO_ONE}-{s:04d}",
                pair_id=pair.pair_id,
                paradigm=ONE_TO_ONE,
                input_question=qs[i],
                targets=[qs[j]],
            )
        )
    return samples


def _batch_samples(
    pair: QAPair,
    paradigm: str,
    targets_per_sample: int,
    samples_per_pair: int,
    rng: random.Random,
) -> list[TrainingSample]:
    qs = pair.questions
    samples = []
    for s in range(samples_per_pair):
        input_idx = s % len(qs)
        input_q = qs[input_idx]
        pool = [i for i in range(len(qs)) if i != input_idx]
        target_idx = sorted(rng.sample(pool, targets_per_sample))
        targets = [qs[i] for i in target_idx]
        instruction = render_prompt(
            paradigm,
            input_q,
            answer=pair.answer if paradigm == INTENTION_ENHANCED else None,
            k=targets_per_sample,
        )
        samples.append(
            TrainingSample(
                instruction=instruction,
                input="",
                output=join_numbered(targets),
                sample_id=f"{pair.pair_id}-{paradigm}-{s:04d}",
                pair_id=pair.pair_id,
                paradigm=paradigm,
                input_question=input_q,
                targets=targets,
            )
        )
    return samples


def build_training_samples(
    kb: KnowledgeBase,
    paradigm: str,
    targets_per_sample: int = DEFAULT_TARGETS_PER_SAMPLE,
    samples_per_pair: int | None = DEFAULT_SAMPLES_PER_PAIR,
    seed: int = 0,
) -> list[TrainingSample]:
    """Construct training samples for one paradigm across the whole KB.

    Pairs without enough questions (>= 2 for one_to_one, >= L+1 for batch
    layouts) are skipped with a warning. samples_per_pair=None means every
    ordered pair for one_to_one; batch layouts require an explicit count.
    Identical arguments always yield the identical sample list.
    """
    if paradigm not in TEMPLATE_IDS:
        raise ValueError(f"unknown paradigm: {paradigm!r}")
    if paradigm in BATCH_TEMPLATE_IDS:
        if targets_per_sample < 1:
            raise ValueError("targets_per_sample must be >= 1")
        if samples_per_pair is None:
            samples_per_pair = DEFAULT_SAMPLES_PER_PAIR
        min_questions = targets_per_sample + 1
    else:
        min_questions = 2

    rng = random.Random(seed)
    samples: list[TrainingSample] = []
    skipped = 0
    for pair in kb.pairs:
        if len(pair.questions) < min_questions:
            skipped += 1
            log.warning(
                "pair %s skipped: %d question(s), need >= %d",
                pair.pair_id,
                len(pair.questions),
                min_questions,
            )
            continue
        if paradigm == ONE_TO_ONE:
            samples.extend(_one_to_one_samples(pair, samples_per_pair, rng))
        else:
            samples.extend(
                _batch_samples(pair, paradigm, targets_per_sample, samples_per_pair, rng)
            )
    if not samples:
        raise NoUsablePairsError(
            f"no usable pairs for paradigm {paradigm!r} "
            f"(need >= {min_questions} questions per pair; skipped {skipped})"
        )
    return samples


def export_finetune_jsonl(samples: list[TrainingSample], path: str | Path) -> None:
    """Write samples as instruction/input/output JSON objects, one per line."""
    if not samples:
        raise ValueError("refusing to export an empty sample list")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            fh.write(json.dumps(sample.to_record(), ensure_ascii=False) + "\n")


def load_finetune_jsonl(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records
