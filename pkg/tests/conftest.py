from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from sqgen.embedders import HashingEmbedder
from sqgen.kb import KnowledgeBase, QAPair

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parent.parent / "data"


@pytest.fixture
def two_pair_kb() -> KnowledgeBase:
    return KnowledgeBase(
        pairs=[
            QAPair(
                pair_id="p1",
                answer="电子版证明2小时内发送，纸质版3至8个工作日。",
                questions=["证明开具时间要多久？", "开证明需要几天？", "证明多久能办好？"],
                tags=["cert"],
            ),
            QAPair(
                pair_id="p2",
                answer="还款日为每月20日，节假日顺延。",
                questions=["还款日是几号？", "每月什么时候还款？", "还款日期怎么查？"],
            ),
        ]
    )


@pytest.fixture
def hash_embedder() -> HashingEmbedder:
    return HashingEmbedder(dim=64)


@pytest.fixture
def golden_templates() -> dict:
    return json.loads((FIXTURES / "golden_templates.json").read_text(encoding="utf-8"))


class StubSentenceEmbedder:
    """Sentence embedder returning hand-assigned vectors, for exact-cosine tests."""

    def __init__(self, table: dict[str, list[float]], embedder_id: str = "stub:v1"):
        self.table = table
        self.embedder_id = embedder_id

    def embed_sentences(self, texts: list[str]) -> np.ndarray:
        return np.array([self.table[t] for t in texts], dtype=np.float64)


class OneHotTokenEmbedder:
    """Token embedder where each distinct text is one orthogonal unit token.

    Makes the pairwise score exactly 1.0 for identical texts and 0.0
    otherwise, so macro-averages can be hand-computed.
    """

    def __init__(self, dim: int = 32):
        self.dim = dim
        self.embedder_id = f"onehot:dim={dim}"
        self._index: dict[str, int] = {}

    def embed_tokens(self, texts: list[str]):
        from sqgen.embedders import TokenEmbeddingSet

        sets = []
        for text in texts:
            idx = self._index.setdefault(text, len(self._index))
            if idx >= self.dim:
                raise ValueError("OneHotTokenEmbedder ran out of dimensions")
            vec = np.zeros((1, self.dim))
            vec[0, idx] = 1.0
            sets.append(TokenEmbeddingSet(tokens=[text], vectors=vec))
        return sets


@pytest.fixture
def stub_sentence_embedder_cls():
    return StubSentenceEmbedder


@pytest.fixture
def onehot_token_embedder() -> OneHotTokenEmbedder:
    return OneHotTokenEmbedder()
