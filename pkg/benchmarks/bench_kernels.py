"""Timing comparison of the compiled kernels against the pure-Python path.

Both variants are importable side by side (random_walk_py / random_walk_nb),
so one process can time them on identical inputs. The pure path exists for
environments without a working JIT and for debugging; this script reports
what that convenience costs.

Run:  python3 benchmarks/bench_kernels.py [--walk-len N] [--tokens N]
"""

import argparse
import time

import numpy as np

from driftlab import corpus_synth as cs
from driftlab import embed, kernels
from driftlab.util import derive_seed


def time_fn(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_random_walk(walk_len: int):
    g = cs.generate_graph(100, 0.1, derive_seed(0, "bench-graph"))
    indptr, nbr, cumw = cs.graph_csr(g)
    out = np.empty(walk_len, dtype=np.int64)
    results = {}
    results["python"] = time_fn(
        kernels.random_walk_py, indptr, nbr, cumw, walk_len, 12345, out
    )
    if kernels.random_walk_nb is not None:
        kernels.random_walk_nb(indptr, nbr, cumw, 10, 12345, out[:10])  # compile
        results["numba"] = time_fn(
            kernels.random_walk_nb, indptr, nbr, cumw, walk_len, 12345, out
        )
    return results


def bench_sgns(tokens: int):
    g = cs.generate_graph(100, 0.1, derive_seed(0, "bench-graph"))
    corpus = cs.sample_walk(g, tokens, derive_seed(0, "bench-walk"))
    vocab = embed.build_vocab(corpus)
    params = embed.SgnsParams(epochs=1)

    results = {}
    for label, enabled in (("python", False), ("numba", True)):
        if enabled and kernels.sgns_train_nb is None:
            continue
        fn = kernels.sgns_train_nb if enabled else kernels.sgns_train_py
        token_ids = np.array([vocab.index(w) for w in corpus.tokens], dtype=np.int64)
        line_starts = np.asarray(corpus.line_starts, dtype=np.int64)
        rng_mat = embed.init_word_vectors(vocab.words, params.dim, 1)
        w_in = rng_mat.copy()
        w_out = np.zeros_like(w_in)
        freq = vocab.counts.astype(np.float64) ** 0.75
        neg_cdf = np.cumsum(freq / freq.sum())
        keep_prob = np.ones(len(vocab), dtype=np.float64)
        args = (
            token_ids, line_starts, w_in, w_out, neg_cdf, keep_prob,
            params.window, params.negatives, params.lr_start, params.lr_end,
            params.epochs, 999, kernels.SIGMOID_TABLE,
        )
        if enabled:
            fn(*(a.copy() if isinstance(a, np.ndarray) else a for a in args))  # compile
        results[label] = time_fn(
            fn, *(a.copy() if isinstance(a, np.ndarray) else a for a in args), repeats=2
        )
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--walk-len", type=int, default=500_000)
    parser.add_argument("--tokens", type=int, default=20_000)
    args = parser.parse_args()

    print(f"numba available and enabled: {kernels.USE_NUMBA}")

    rw = bench_random_walk(args.walk_len)
    print(f"\nrandom_walk ({args.walk_len:,} steps)")
    for label, secs in rw.items():
        print(f"  {label:>7}: {secs:8.3f}s  ({args.walk_len / secs / 1e6:6.2f} M steps/s)")
    if "numba" in rw:
        print(f"  speedup: {rw['python'] / rw['numba']:.0f}x")

    sg = bench_sgns(args.tokens)
    print(f"\nsgns_train ({args.tokens:,} tokens, 1 epoch)")
    for label, secs in sg.items():
        print(f"  {label:>7}: {secs:8.3f}s  ({args.tokens / secs / 1e3:6.1f} K tokens/s)")
    if "numba" in sg:
        print(f"  speedup: {sg['python'] / sg['numba']:.0f}x")


if __name__ == "__main__":
    main()
