"""Greedy token-matching kernels.

Scoring a run means evaluating every (generated, reference) question pair,
and each of those needs a full token-by-token cosine table. That inner loop
dominates evaluation runtime, so it is JIT-compiled with numba by default,
with a pure-numpy fallback for environments without a working compiler.

Backend selection: numba when importable, unless the SQG_DISABLE_NUMBA
environment variable is set to a truthy value ("1", "true", "yes"). Both
implementations are importable directly for benchmarking and cross-checks.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "SQG_DISABLE_NUMBA"


def _numba_disabled() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in ("1", "true", "yes")


try:
    if _numba_disabled():
        raise ImportError(f"{_ENV_FLAG} set")
    from numba import njit, prange
    from numba.core import config as _numba_config

    # Prefer threading layers that exist in this environment; avoids the
    # noisy TBB-version warning on first parallel dispatch.
    _numba_config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag in tests
    _HAVE_NUMBA = False

BACKEND = "numba" if _HAVE_NUMBA else "numpy"


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """L2-normalize each row; all-zero rows are left at zero."""
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return m / norms


def f1_from(precision: float, recall: float) -> float:
    denom = precision + recall
    if denom == 0.0:
        return 0.0
    return 2.0 * precision * recall / denom


# ── pure-numpy implementation ────────────────────────────────────────────────


def greedy_scores_numpy(cand: np.ndarray, ref: np.ndarray) -> tuple[float, float]:
    """Token-level (precision, recall) for one pair of normalized matrices.

    precision = mean over candidate tokens of the max cosine to any reference
    token; recall is the symmetric column statistic.
    """
    sim = cand @ ref.T
    return float(sim.max(axis=1).mean()), float(sim.max(axis=0).mean())


def score_matrix_numpy(cands: list[np.ndarray], refs: list[np.ndarray]) -> np.ndarray:
    out = np.empty((len(cands), len(refs)), dtype=np.float64)
    for i, c in enumerate(cands):
        for j, r in enumerate(refs):
            p, rr = greedy_scores_numpy(c, r)
            out[i, j] = f1_from(p, rr)
    return out


# ── numba implementation ─────────────────────────────────────────────────────

if _HAVE_NUMBA:

    @njit(cache=True)
    def _greedy_scores_jit(cand, ref):  # pragma: no cover - compiled
        nc, d = cand.shape
        nr = ref.shape[0]
        col_max = np.full(nr, -np.inf)
        p_sum = 0.0
        for a in range(nc):
            row_max = -np.inf
            for b in range(nr):
                s = 0.0
                for k in range(d):
                    s += cand[a, k] * ref[b, k]
                if s > row_max:
                    row_max = s
                if s > col_max[b]:
                    col_max[b] = s
            p_sum += row_max
        r_sum = 0.0
        for b in range(nr):
            r_sum += col_max[b]
        return p_sum / nc, r_sum / nr

    @njit(cache=True, parallel=True)
    def _score_matrix_jit(cand_flat, cand_off, ref_flat, ref_off, out):  # pragma: no cover
        n = cand_off.shape[0] - 1
        m = ref_off.shape[0] - 1
        for i in prange(n):
            c = cand_flat[cand_off[i] : cand_off[i + 1]]
            for j in range(m):
                r = ref_flat[ref_off[j] : ref_off[j + 1]]
                p, rr = _greedy_scores_jit(c, r)
                denom = p + rr
                out[i, j] = 0.0 if denom == 0.0 else 2.0 * p * rr / denom

    def greedy_scores_numba(cand: np.ndarray, ref: np.ndarray) -> tuple[float, float]:
        p, r = _greedy_scores_jit(
            np.ascontiguousarray(cand, dtype=np.float64),
            np.ascontiguousarray(ref, dtype=np.float64),
        )
        return float(p), float(r)

    def _flatten(sets: list[np.ndarray], dim: int) -> tuple[np.ndarray, np.ndarray]:
        offsets = np.zeros(len(sets) + 1, dtype=np.int64)
        for i, s in enumerate(sets):
            offsets[i + 1] = offsets[i] + s.shape[0]
        flat = np.empty((int(offsets[-1]), dim), dtype=np.float64)
        for i, s in enumerate(sets):
            flat[offsets[i] : offsets[i + 1]] = s
        return flat, offsets

    def score_matrix_numba(cands: list[np.ndarray], refs: list[np.ndarray]) -> np.ndarray:
        dim = cands[0].shape[1]
        cand_flat, cand_off = _flatten(cands, dim)
        ref_flat, ref_off = _flatten(refs, dim)
        out = np.empty((len(cands), len(refs)), dtype=np.float64)
        _score_matrix_jit(cand_flat, cand_off, ref_flat, ref_off, out)
        return out


# ── dispatch ─────────────────────────────────────────────────────────────────


def greedy_scores(cand: np.ndarray, ref: np.ndarray) -> tuple[float, float]:
    """(precision, recall) for one candidate/reference pair of raw matrices."""
    c = normalize_rows(cand)
    r = normalize_rows(ref)
    if c.shape[1] != r.shape[1]:
        raise ValueError(f"dimension mismatch: {c.shape[1]} vs {r.shape[1]}")
    if BACKEND == "numba":
        return greedy_scores_numba(c, r)
    return greedy_scores_numpy(c, r)


def bertscore_f1(cand: np.ndarray, ref: np.ndarray) -> float:
    p, r = greedy_scores(cand, ref)
    return f1_from(p, r)


def score_matrix(cands: list[np.ndarray], refs: list[np.ndarray]) -> np.ndarray:
    """Matrix of pairwise F1 scores: rows are candidates, columns references."""
    if not cands or not refs:
        raise ValueError("score_matrix requires non-empty candidate and reference lists")
    dim = cands[0].shape[1]
    norm_c = [normalize_rows(c) for c in cands]
    norm_r = [normalize_rows(r) for r in refs]
    for s in norm_c + norm_r:
        if s.shape[1] != dim:
            raise ValueError("all token sets must share one embedding dimension")
        if s.shape[0] < 1:
            raise ValueError("empty token set")
    if BACKEND == "numba":
        return score_matrix_numba(norm_c, norm_r)
    return score_matrix_numpy(norm_c, norm_r)
