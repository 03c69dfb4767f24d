"""Benchmark the greedy-matching kernels: numba JIT vs pure numpy.

Synthetic workload shaped like a real evaluation: per source pair, a matrix
of (generated x reference) question pairs, each scored over token-by-token
cosine tables.

Run:
    python benchmarks/bench_kernels.py [--pairs 50] [--refs 45] [--tokens 24] [--dim 64]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sqgen import kernels


def make_workload(n_generated: int, n_refs: int, max_tokens: int, dim: int, seed: int = 0):
    rng = np.random.default_rng(seed)

    def token_sets(count):
        return [
            kernels.normalize_rows(rng.standard_normal((int(rng.integers(4, max_tokens + 1)), dim)))
            for _ in range(count)
        ]

    return token_sets(n_generated), token_sets(n_refs)


def bench(fn, cands, refs, repeats: int = 3) -> tuple[float, np.ndarray]:
    best = float("inf")
    out = None
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(cands, refs)
        best = min(best, time.perf_counter() - start)
    return best, out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=50, help="generated questions per source pair")
    parser.add_argument("--refs", type=int, default=45, help="reference questions per source pair")
    parser.add_argument("--tokens", type=int, default=24, help="max tokens per question")
    parser.add_argument("--dim", type=int, default=64, help="embedding dimension")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    cands, refs = make_workload(args.pairs, args.refs, args.tokens, args.dim)
    cells = args.pairs * args.refs
    print(f"workload: {args.pairs} x {args.refs} question pairs "
          f"({cells} score cells), <= {args.tokens} tokens, dim {args.dim}")

    t_numpy, out_numpy = bench(kernels.score_matrix_numpy, cands, refs, args.repeats)
    print(f"numpy : {t_numpy * 1e3:9.2f} ms  ({cells / t_numpy:,.0f} cells/s)")

    if kernels.BACKEND != "numba":
        print("numba : unavailable (SQG_DISABLE_NUMBA set or numba missing)")
        return

    kernels.score_matrix_numba(cands[:2], refs[:2])  # JIT warmup outside timing
    t_numba, out_numba = bench(kernels.score_matrix_numba, cands, refs, args.repeats)
    print(f"numba : {t_numba * 1e3:9.2f} ms  ({cells / t_numba:,.0f} cells/s)")
    print(f"speedup: {t_numpy / t_numba:.1f}x")

    max_diff = float(np.max(np.abs(out_numpy - out_numba)))
    print(f"max |numpy - numba| = {max_diff:.2e}")
    assert max_diff < 1e-9, "backends disagree"


if __name__ == "__main__":
    main()
