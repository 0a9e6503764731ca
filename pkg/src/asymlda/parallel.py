"""Batched, multi-worker fitting with periodic synchronization.

The corpus is cut into contiguous document batches (never splitting a
parent chain) that are dealt round-robin to workers.  Each outer
iteration, every worker copies the shared word-topic counts, runs 10
Gibbs sweeps over its own documents against that copy, and hands back
the difference; the driver folds the differences into the shared
counts in worker order and then adjusts the priors.  Workers own
disjoint document slices and private RNG streams, so a run's result
depends only on the seed and the worker count, never on scheduling.

With one worker the driver is plain serial Gibbs in 10-sweep blocks.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import RngStream, derive_stream, gibbs_sweeps
from .corpus import Corpus, SeedAssignment
from .model import FitReport, ModelConfig, ModelState
from .sampler import SYNC_SWEEPS, adjust_priors, check_convergence, initialize

__all__ = ["BatchPlan", "WorkerDelta", "fit", "merge", "partition", "worker_run"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatchPlan:
    """Contiguous document batches and their worker assignment."""

    batches: list[tuple[int, int]]
    assignment: list[int]
    n_workers: int

    def worker_ranges(self, worker: int) -> np.ndarray:
        """(n, 2) array of [start, stop) document ranges for a worker."""
        rows = [
            b
            for b, w in zip(self.batches, self.assignment)
            if w == worker
        ]
        if not rows:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(rows, dtype=np.int64)


@dataclass
class WorkerDelta:
    """One worker's contribution from a 10-sweep block.

    ``topic_word_delta`` is (K, V): the worker's word-topic count
    changes.  ``changed`` counts tokens that switched topic between the
    block's last two sweeps.
    """

    topic_word_delta: np.ndarray
    topic_total_delta: np.ndarray
    changed: int


def partition(corpus: Corpus, batch_size: float, workers: int) -> BatchPlan:
    """Cut the corpus into batches of roughly ``batch_size`` of the
    documents each, keeping parent chains whole.

    Nominal boundaries fall every ``batch_size * D`` documents and are
    pushed forward to the next chain start.  Batches go to workers
    round-robin; with heavily skewed chain lengths some workers may get
    more documents, but every document belongs to exactly one worker.
    """
    if not 0.0 < batch_size <= 1.0:
        raise ValueError("batch_size must lie in (0, 1]")
    if workers < 1:
        raise ValueError("workers must be a positive integer")
    n_docs = len(corpus)
    if n_docs == 0:
        raise ValueError("cannot partition an empty corpus")
    prev = corpus.predecessor_indices()
    n_nominal = math.ceil(1.0 / batch_size)
    cuts = [0]
    for j in range(1, n_nominal):
        b = round(j * n_docs / n_nominal)
        while b < n_docs and prev[b] != -1:
            b += 1
        if cuts[-1] < b < n_docs:
            cuts.append(b)
    cuts.append(n_docs)
    batches = [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]
    assignment = [i % workers for i in range(len(batches))]
    return BatchPlan(batches=batches, assignment=assignment, n_workers=workers)


def worker_run(
    state: ModelState,
    doc_ranges: np.ndarray,
    rng: RngStream,
    sweeps: int = SYNC_SWEEPS,
) -> WorkerDelta:
    """Run one worker's block of sweeps against a snapshot of the counts.

    The worker updates its documents' assignments and topic counts in
    place (it owns them) but samples against a private copy of the
    shared word-topic matrix, returning the net difference for the
    driver to merge.
    """
    local_wt = state._word_topic_real.copy()
    local_tt = state.topic_total_real.copy()
    changed = gibbs_sweeps(
        state.token_word,
        state.doc_start,
        doc_ranges,
        state.z,
        state.doc_topic,
        local_wt,
        state._wt_base,
        local_tt,
        state._tt_base,
        state.alpha_k,
        float(state.config.gamma),
        state.prev_doc,
        rng.state,
        sweeps,
        True,
    )
    return WorkerDelta(
        topic_word_delta=(local_wt - state._word_topic_real).T,
        topic_total_delta=local_tt - state.topic_total_real,
        changed=int(changed),
    )


def merge(state: ModelState, deltas: list[WorkerDelta]) -> int:
    """Fold worker deltas into the shared counts, in worker order.

    Returns the summed change count.  Counts are integer-valued, so
    merging reproduces exactly what the same sweeps would have produced
    serially.  A merged count below zero would mean a worker shed seed
    pseudo-count mass, which the update rules make impossible; it is
    checked anyway because silent corruption here would poison the rest
    of the run.
    """
    total_changed = 0
    for wd in deltas:
        state._word_topic_real += wd.topic_word_delta.T
        state.topic_total_real += wd.topic_total_delta
        total_changed += wd.changed
    if state._word_topic_real.min() < 0.0:
        raise RuntimeError(
            "merged word-topic counts fell below zero; shared state is corrupt"
        )
    if state.token_word is not None:
        expect = float(state.token_word.shape[0])
        if state.topic_total_real.sum() != expect:
            raise RuntimeError(
                "merged topic totals do not sum to the token count; "
                "shared state is corrupt"
            )
    return total_changed


def fit(
    corpus: Corpus,
    config: ModelConfig,
    seeds: SeedAssignment | None = None,
) -> tuple[ModelState, FitReport]:
    """Fit a model: initialize, then run 10-sweep blocks until
    ``max_iter`` sweeps have run or, with ``auto_stop``, until the
    between-sweep change count rises.

    Deterministic for fixed (rng_seed, workers): worker streams are
    derived from the seed, batches are assigned statically, and merges
    happen in worker order.
    """
    t_start = time.perf_counter()
    state = initialize(corpus, config, seeds)
    n_workers = config.workers
    plan = partition(corpus, config.batch_size, n_workers)
    ranges = [plan.worker_ranges(e) for e in range(n_workers)]
    streams = [derive_stream(config.rng_seed, 1 + e) for e in range(n_workers)]

    n_outer = config.max_iter // SYNC_SWEEPS
    delta_history: list[int] = []
    trajectory = [state.alpha_k.copy()]
    converged_early = False
    iterations_run = 0

    pool = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None
    try:
        for _ in range(n_outer):
            if pool is None:
                deltas = [worker_run(state, ranges[0], streams[0])]
            else:
                futures = [
                    pool.submit(worker_run, state, ranges[e], streams[e])
                    for e in range(n_workers)
                ]
                deltas = [f.result() for f in futures]
            delta_i = merge(state, deltas)
            net = np.zeros(config.k, dtype=np.float64)
            for wd in deltas:
                net += wd.topic_total_delta
            adjust_priors(state, net)
            trajectory.append(state.alpha_k.copy())
            delta_history.append(delta_i)
            iterations_run += SYNC_SWEEPS
            if config.auto_stop and check_convergence(delta_history):
                converged_early = True
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    report = FitReport(
        iterations_run=iterations_run,
        delta_history=delta_history,
        alpha_trajectory=np.array(trajectory),
        elapsed_seconds=time.perf_counter() - t_start,
        converged_early=converged_early,
        workers=n_workers,
        topic_labels=list(state.topic_labels),
    )
    if converged_early:
        logger.info(
            "stopped after %d sweeps (change count rose: %s)",
            iterations_run,
            delta_history[-2:],
        )
    return state, report
