"""Compiled sampling kernels and deterministic RNG streams.

The word-topic count matrix is stored transposed, shape (V, K), so the
inner loop over topics for a fixed word walks contiguous memory.  Real
token counts are kept separate from the fixed seed pseudo-counts: the
kernels mutate only integer-valued arrays, which keeps every add and
subtract exact and makes worker-delta merges reproduce serial counts
bit for bit.

The RNG is splitmix64.  A stream is a single uint64 cell advanced in
place by the kernels; independent streams are derived from a seed and
a small tag, so worker streams and the initialization stream never
overlap in practice and results are reproducible for a given seed and
worker count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MASK = (1 << 64) - 1
_GOLD_INT = 0x9E3779B97F4A7C15
_MIX1_INT = 0xBF58476D1CE4E5B9
_MIX2_INT = 0x94D049BB133111EB

_GOLD = np.uint64(_GOLD_INT)
_MIX1 = np.uint64(_MIX1_INT)
_MIX2 = np.uint64(_MIX2_INT)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


def _mix64(x: int) -> int:
    x &= _MASK
    x ^= x >> 30
    x = (x * _MIX1_INT) & _MASK
    x ^= x >> 27
    x = (x * _MIX2_INT) & _MASK
    x ^= x >> 31
    return x


class RngStream:
    """A splitmix64 stream: one uint64 state cell, advanced in place."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = np.array([state & _MASK], dtype=np.uint64)

    def uniform(self) -> float:
        return float(rng_uniform(self.state))

    def copy(self) -> "RngStream":
        return RngStream(int(self.state[0]))

    def __repr__(self) -> str:
        return f"RngStream(0x{int(self.state[0]):016x})"


def derive_stream(seed: int, tag: int) -> RngStream:
    """Stream for (seed, tag); tag 0 is initialization, 1 + e is worker e."""
    return RngStream(_mix64(((seed & _MASK) + (tag + 1) * _GOLD_INT) & _MASK))


@njit(nogil=True, cache=True, inline="always")
def _next_uniform(state):
    state[0] += _GOLD
    z = state[0]
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    z = z ^ (z >> _S31)
    return (z >> _S11) * _INV53


@njit(nogil=True, cache=True)
def rng_uniform(state):
    return _next_uniform(state)


@njit(nogil=True, cache=True)
def random_topic_fill(z, n_topics, state):
    for i in range(z.shape[0]):
        z[i] = np.int32(_next_uniform(state) * n_topics)


@njit(nogil=True, cache=True)
def gibbs_sweeps(
    token_word,
    doc_start,
    ranges,
    z,
    doc_topic,
    wt_real,
    wt_base,
    tt_real,
    tt_base,
    alpha_k,
    gamma,
    prev_doc,
    rng_state,
    n_sweeps,
    count_last,
):
    """Run collapsed Gibbs sweeps over the given document ranges.

    ``wt_real`` is the (V, K) real count matrix and ``wt_base`` the
    fixed (V, K) seed-plus-beta offsets; ``tt_real`` / ``tt_base`` are
    the matching per-topic totals (base includes V * beta).  Documents
    in ``ranges`` (rows of [start, stop)) are visited in order within
    each sweep.  When ``count_last`` is set, returns how many tokens
    changed assignment during the final sweep, i.e. between the last
    two sweeps' states.
    """
    n_topics = alpha_k.shape[0]
    sum_alpha = 0.0
    for k in range(n_topics):
        sum_alpha += alpha_k[k]
    inv_tt = np.empty(n_topics, dtype=np.float64)
    for k in range(n_topics):
        inv_tt[k] = 1.0 / (tt_real[k] + tt_base[k])
    a = np.empty(n_topics, dtype=np.float64)
    cumw = np.empty(n_topics, dtype=np.float64)
    changed = 0
    for sweep_i in range(n_sweeps):
        counting = count_last and sweep_i == n_sweeps - 1
        for r in range(ranges.shape[0]):
            for d in range(ranges[r, 0], ranges[r, 1]):
                t0 = doc_start[d]
                t1 = doc_start[d + 1]
                if t1 == t0:
                    continue
                p = prev_doc[d]
                if gamma > 0.0 and p >= 0:
                    # prior mass carried over from the chain predecessor,
                    # using its live topic counts from this sweep
                    plen = doc_start[p + 1] - doc_start[p]
                    denom = plen + sum_alpha
                    for k in range(n_topics):
                        a[k] = alpha_k[k] + gamma * sum_alpha * (
                            doc_topic[p, k] + alpha_k[k]
                        ) / denom
                else:
                    for k in range(n_topics):
                        a[k] = alpha_k[k]
                for t in range(t0, t1):
                    v = token_word[t]
                    old = z[t]
                    doc_topic[d, old] -= 1
                    wt_real[v, old] -= 1.0
                    tt_real[old] -= 1.0
                    inv_tt[old] = 1.0 / (tt_real[old] + tt_base[old])
                    total = 0.0
                    for k in range(n_topics):
                        total += (
                            (doc_topic[d, k] + a[k])
                            * (wt_real[v, k] + wt_base[v, k])
                            * inv_tt[k]
                        )
                        cumw[k] = total
                    u = _next_uniform(rng_state) * total
                    new = 0
                    while new < n_topics - 1 and u > cumw[new]:
                        new += 1
                    z[t] = new
                    doc_topic[d, new] += 1
                    wt_real[v, new] += 1.0
                    tt_real[new] += 1.0
                    inv_tt[new] = 1.0 / (tt_real[new] + tt_base[new])
                    if counting and new != old:
                        changed += 1
    return changed


@njit(nogil=True, cache=True)
def predict_sweeps(
    token_word,
    doc_start,
    z,
    doc_topic,
    phi_vk,
    alpha_k,
    gamma,
    prev_doc,
    rng_state,
    n_iter,
):
    """Gibbs sweeps over held-out documents against frozen word weights.

    ``phi_vk`` is the (V, K) matrix of per-word topic weights from the
    trained model; only the per-document topic counts move.
    """
    n_topics = alpha_k.shape[0]
    n_docs = doc_start.shape[0] - 1
    sum_alpha = 0.0
    for k in range(n_topics):
        sum_alpha += alpha_k[k]
    a = np.empty(n_topics, dtype=np.float64)
    cumw = np.empty(n_topics, dtype=np.float64)
    for _ in range(n_iter):
        for d in range(n_docs):
            t0 = doc_start[d]
            t1 = doc_start[d + 1]
            if t1 == t0:
                continue
            p = prev_doc[d]
            if gamma > 0.0 and p >= 0:
                plen = doc_start[p + 1] - doc_start[p]
                denom = plen + sum_alpha
                for k in range(n_topics):
                    a[k] = alpha_k[k] + gamma * sum_alpha * (
                        doc_topic[p, k] + alpha_k[k]
                    ) / denom
            else:
                for k in range(n_topics):
                    a[k] = alpha_k[k]
            for t in range(t0, t1):
                v = token_word[t]
                old = z[t]
                doc_topic[d, old] -= 1
                total = 0.0
                for k in range(n_topics):
                    total += (doc_topic[d, k] + a[k]) * phi_vk[v, k]
                    cumw[k] = total
                u = _next_uniform(rng_state) * total
                new = 0
                while new < n_topics - 1 and u > cumw[new]:
                    new += 1
                z[t] = new
                doc_topic[d, new] += 1
