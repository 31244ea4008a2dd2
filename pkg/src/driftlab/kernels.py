"""Hot inner loops: random-walk sampling and SGNS training.

Each kernel is written as a plain scalar-loop function and JIT-compiled with
numba when available. Setting the env var DRIFTLAB_NO_NUMBA=1 (or running
without numba installed) selects the uncompiled fallback, which executes the
identical code and therefore produces bit-identical results, just slowly.
``benchmarks/bench_kernels.py`` compares the two paths.

Randomness inside kernels uses an inline Lehmer (MINSTD) generator: all
intermediates fit comfortably in int64, so compiled and interpreted runs
agree exactly.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("DRIFTLAB_NO_NUMBA", "").strip() not in ("", "0")
try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and not _DISABLE

# Lehmer / MINSTD constants
_LEHMER_A = 48271
_LEHMER_M = 2147483647  # 2^31 - 1

# Sigmoid lookup table (f32) so both execution paths round identically.
EXP_TABLE_SIZE = 1000
MAX_EXP = 6.0


def _build_sigmoid_table() -> np.ndarray:
    x = (np.arange(EXP_TABLE_SIZE, dtype=np.float64) / EXP_TABLE_SIZE * 2.0 - 1.0) * MAX_EXP
    return (1.0 / (1.0 + np.exp(-x))).astype(np.float32)


SIGMOID_TABLE = _build_sigmoid_table()


def seed_to_state(seed: int) -> int:
    """Map an arbitrary u64 seed to a valid Lehmer state in [1, M-1]."""
    return int(seed) % (_LEHMER_M - 1) + 1


# ---------------------------------------------------------------------------
# kernel bodies (numba-compatible subset: scalar loops, explicit dtypes)
# ---------------------------------------------------------------------------


def _random_walk_impl(indptr, nbr, cumw, length, state, out):
    """Weighted random walk over a CSR graph; writes node ids into ``out``.

    ``cumw`` holds per-node cumulative out-edge weights (running sum restarts
    at each node's indptr slot). Transition probability is proportional to
    edge weight. Returns the final RNG state.
    """
    n = indptr.shape[0] - 1
    state = (state * _LEHMER_A) % _LEHMER_M
    node = state % n
    for i in range(length):
        out[i] = node
        if i == length - 1:
            break
        lo = indptr[node]
        hi = indptr[node + 1]
        total = cumw[hi - 1]
        state = (state * _LEHMER_A) % _LEHMER_M
        u = (state / _LEHMER_M) * total
        # first index in [lo, hi) with cumw > u
        a = lo
        b = hi - 1
        while a < b:
            mid = (a + b) // 2
            if cumw[mid] <= u:
                a = mid + 1
            else:
                b = mid
        node = nbr[a]
    return state


def _sgns_train_impl(
    token_ids,
    line_starts,
    w_in,
    w_out,
    neg_cdf,
    keep_prob,
    window,
    negatives,
    lr_start,
    lr_end,
    epochs,
    state,
    sig_table,
):
    """Skip-gram negative-sampling SGD over a token stream, in place.

    One pass per epoch; windows never cross line boundaries; the learning
    rate decays linearly with the number of stream positions consumed.
    Returns 0 on success, 3 if parameters went non-finite.
    """
    n_tokens = token_ids.shape[0]
    n_lines = line_starts.shape[0] - 1
    vocab_size = w_in.shape[0]
    dim = w_in.shape[1]
    total_positions = float(epochs * n_tokens)
    total_neg = neg_cdf[vocab_size - 1]
    sent_ids = np.empty(n_tokens, dtype=np.int64)
    sent_pos = np.empty(n_tokens, dtype=np.int64)
    neu = np.zeros(dim, dtype=np.float32)
    table_scale = EXP_TABLE_SIZE / (2.0 * MAX_EXP)

    for ep in range(epochs):
        for li in range(n_lines):
            # subsample frequent words into a compacted sentence buffer
            m = 0
            for p in range(line_starts[li], line_starts[li + 1]):
                tok = token_ids[p]
                kp = keep_prob[tok]
                if kp < 1.0:
                    state = (state * _LEHMER_A) % _LEHMER_M
                    if (state / _LEHMER_M) >= kp:
                        continue
                sent_ids[m] = tok
                sent_pos[m] = p
                m += 1

            for i in range(m):
                center = sent_ids[i]
                progress = (ep * n_tokens + sent_pos[i]) / total_positions
                alpha = lr_start + (lr_end - lr_start) * progress
                state = (state * _LEHMER_A) % _LEHMER_M
                shrink = state % window
                wsz = window - shrink
                j_lo = i - wsz
                if j_lo < 0:
                    j_lo = 0
                j_hi = i + wsz + 1
                if j_hi > m:
                    j_hi = m
                for j in range(j_lo, j_hi):
                    if j == i:
                        continue
                    ctx = sent_ids[j]
                    for d in range(dim):
                        neu[d] = np.float32(0.0)
                    for k in range(negatives + 1):
                        if k == 0:
                            target = ctx
                            label = 1.0
                        else:
                            state = (state * _LEHMER_A) % _LEHMER_M
                            u = (state / _LEHMER_M) * total_neg
                            a = 0
                            b = vocab_size - 1
                            while a < b:
                                mid = (a + b) // 2
                                if neg_cdf[mid] <= u:
                                    a = mid + 1
                                else:
                                    b = mid
                            target = a
                            if target == ctx:
                                continue
                            label = 0.0
                        f = np.float32(0.0)
                        for d in range(dim):
                            f += w_in[center, d] * w_out[target, d]
                        fx = float(f)
                        if fx >= MAX_EXP:
                            s = 1.0
                        elif fx <= -MAX_EXP:
                            s = 0.0
                        else:
                            s = float(sig_table[int((fx + MAX_EXP) * table_scale)])
                        g = np.float32((label - s) * alpha)
                        for d in range(dim):
                            tmp = w_out[target, d]
                            neu[d] += g * tmp
                            w_out[target, d] = tmp + g * w_in[center, d]
                    for d in range(dim):
                        w_in[center, d] += neu[d]
        # divergence guard once per epoch
        ok = True
        for v in range(vocab_size):
            if not np.isfinite(w_in[v, 0]):
                ok = False
                break
        if not ok:
            return 3
    return 0


# ---------------------------------------------------------------------------
# path selection
# ---------------------------------------------------------------------------

random_walk_py = _random_walk_impl
sgns_train_py = _sgns_train_impl

if USE_NUMBA:
    random_walk_nb = njit(cache=True, nogil=True)(_random_walk_impl)
    sgns_train_nb = njit(cache=True, nogil=True)(_sgns_train_impl)
    random_walk = random_walk_nb
    sgns_train = sgns_train_nb
else:  # fallback: interpreted, bit-identical
    random_walk_nb = None
    sgns_train_nb = None
    random_walk = random_walk_py
    sgns_train = sgns_train_py
