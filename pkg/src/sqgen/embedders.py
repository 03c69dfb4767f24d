"""Embedding providers: a deterministic offline hasher and an HTTP client.

Token-granularity embeddings feed the greedy-matching score; sentence
embeddings feed retrieval. The hashing embedder exists so the whole pipeline
runs offline and reproducibly: identical strings always map to identical
vectors, and sentence vectors of texts sharing character n-grams land closer
together than unrelated texts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import requests

from .normalize import is_blank


@dataclass
class TokenEmbeddingSet:
    """Per-token vectors for one text; all vectors share one dimension."""

    tokens: list[str]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if len(self.tokens) < 1:
            raise ValueError("token set must contain at least one token")
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.tokens):
            raise ValueError(
                f"vectors shape {self.vectors.shape} does not match {len(self.tokens)} tokens"
            )

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


class EmbedderError(Exception):
    pass


def tokenize_chars(text: str) -> list[str]:
    """Character tokens with whitespace dropped; suits mixed CJK/Latin text."""
    return [ch for ch in text if not ch.isspace()]


def _char_ngrams(text: str, n: int) -> list[str]:
    chars = tokenize_chars(text)
    if len(chars) < n:
        return []
    return ["".join(chars[i : i + n]) for i in range(len(chars) - n + 1)]


class HashingEmbedder:
    """Deterministic pseudo-embedder for offline tests and demo runs.

    Token vectors are hash-seeded gaussian draws, so repeated tokens agree
    exactly and distinct tokens are near-orthogonal in expectation. Sentence
    vectors are signed hashed bags of character 1- and 2-grams, giving texts
    with shared substrings a higher cosine than unrelated texts.
    """

    def __init__(self, dim: int = 64):
        if dim < 8:
            raise ValueError("dim must be >= 8")
        self.dim = dim
        self.embedder_id = f"hash:dim={dim}"
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "big")))
        vec = rng.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        self._token_cache[token] = vec
        return vec

    def embed_tokens(self, texts: list[str]) -> list[TokenEmbeddingSet]:
        sets = []
        for text in texts:
            tokens = tokenize_chars(text)
            if not tokens:
                raise EmbedderError(f"cannot embed blank text: {text!r}")
            vectors = np.stack([self._token_vector(t) for t in tokens])
            sets.append(TokenEmbeddingSet(tokens=tokens, vectors=vectors))
        return sets

    def embed_sentences(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            if is_blank(text):
                raise EmbedderError(f"cannot embed blank text: {text!r}")
            for n in (1, 2):
                for gram in _char_ngrams(text, n):
                    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
                    value = int.from_bytes(digest, "big")
                    bucket = value % self.dim
                    sign = 1.0 if (value >> 63) & 1 else -1.0
                    out[i, bucket] += sign
            norm = np.linalg.norm(out[i])
            if norm > 0:
                out[i] /= norm
        return out


class HTTPEmbedder:
    """Client for an embedding endpoint.

    POST {base_url}/v1/embed with {"texts": [...], "granularity": "token" |
    "sentence"}; token responses carry per-text token lists and per-token
    vectors, sentence responses one vector per text.
    """

    def __init__(self, base_url: str, token: str | None = None, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self.embedder_id = f"http:{self.base_url}"
        self._session = requests.Session()

    def _post(self, texts: list[str], granularity: str) -> dict:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = self._session.post(
                f"{self.base_url}/v1/embed",
                json={"texts": texts, "granularity": granularity},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise EmbedderError(f"embed request failed: {exc}") from exc
        if resp.status_code < 200 or resp.status_code >= 300:
            raise EmbedderError(f"embed endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise EmbedderError(f"embed endpoint returned non-JSON body: {exc}") from exc

    def embed_tokens(self, texts: list[str]) -> list[TokenEmbeddingSet]:
        payload = self._post(texts, "token")
        tokens = payload.get("tokens")
        vectors = payload.get("vectors")
        if not isinstance(tokens, list) or not isinstance(vectors, list) or len(tokens) != len(texts):
            raise EmbedderError("malformed token embedding response")
        sets = []
        for text_tokens, text_vectors in zip(tokens, vectors):
            try:
                sets.append(
                    TokenEmbeddingSet(tokens=list(text_tokens), vectors=np.asarray(text_vectors))
                )
            except ValueError as exc:
                raise EmbedderError(f"malformed token embedding response: {exc}") from exc
        return sets

    def embed_sentences(self, texts: list[str]) -> np.ndarray:
        payload = self._post(texts, "sentence")
        vectors = payload.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise EmbedderError("malformed sentence embedding response")
        return np.asarray(vectors, dtype=np.float64)
