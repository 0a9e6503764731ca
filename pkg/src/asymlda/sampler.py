"""Sampling operations: initialization, sweeps, prior adjustment.

Fitting proceeds in blocks of 10 Gibbs sweeps.  After each block the
per-topic Dirichlet priors take one adjustment step toward the realized
topic distribution, and the number of tokens that changed topic between
the block's final two sweeps is recorded; fitting can stop early the
first time that change count rises instead of falling.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from ._kernels import RngStream, derive_stream, gibbs_sweeps, random_topic_fill
from .corpus import Corpus, SeedAssignment
from .model import FitReport, ModelConfig, ModelState

__all__ = [
    "adjust_priors",
    "check_convergence",
    "fit_serial",
    "initialize",
    "sweep",
]

logger = logging.getLogger(__name__)

# Workers synchronize, and priors adjust, after this many sweeps.
SYNC_SWEEPS = 10


def initialize(
    corpus: Corpus,
    config: ModelConfig,
    seeds: SeedAssignment | None = None,
    rng: RngStream | None = None,
) -> ModelState:
    """Build the starting state for a fitting run.

    Every token gets a uniformly random topic.  Seeded topics (the
    first ``seeds.n_seeded`` of the K topics) then receive fixed
    pseudo-counts of ``seed_weight * total_tokens / V`` on each of
    their seed words.  The prior step sizes ``eps_k`` are set from the
    random assignment: ``nu * alpha / M_k`` where ``M_k`` counts tokens
    initially on topic k, so topics start with comparable adjustment
    speed regardless of corpus size.
    """
    if corpus.total_tokens == 0:
        raise ValueError("cannot fit an empty corpus")
    seeds = seeds or SeedAssignment.empty()
    n_topics = config.k
    n_terms = len(corpus.vocabulary)
    if seeds.n_seeded > n_topics:
        raise ValueError(
            f"{seeds.n_seeded} seeded topics but only k={n_topics} topics"
        )
    labels = list(seeds.labels)
    labels += [f"other{i + 1}" for i in range(n_topics - seeds.n_seeded)]

    token_word, doc_start = corpus.flatten()
    n_tokens = token_word.shape[0]
    n_docs = len(corpus)
    if rng is None:
        rng = derive_stream(config.rng_seed, 0)

    z = np.empty(n_tokens, dtype=np.int32)
    random_topic_fill(z, n_topics, rng.state)

    token_doc = np.repeat(
        np.arange(n_docs, dtype=np.int64), np.diff(doc_start)
    )
    doc_topic = (
        np.bincount(token_doc * n_topics + z, minlength=n_docs * n_topics)
        .reshape(n_docs, n_topics)
        .astype(np.int32)
    )
    word_topic = (
        np.bincount(
            token_word.astype(np.int64) * n_topics + z,
            minlength=n_terms * n_topics,
        )
        .reshape(n_terms, n_topics)
        .astype(np.float64)
    )
    topic_total = np.bincount(z, minlength=n_topics).astype(np.float64)

    # Step sizes come from the initial random assignment, before any
    # seed pseudo-counts exist.
    initial_mass = np.bincount(z, minlength=n_topics).astype(np.float64)
    eps_k = np.zeros(n_topics, dtype=np.float64)
    if config.nu > 0:
        empty = initial_mass == 0
        if empty.any():
            logger.warning(
                "topics %s received no tokens at initialization; their "
                "priors will not adjust",
                np.nonzero(empty)[0].tolist(),
            )
        nz = ~empty
        eps_k[nz] = config.nu * config.alpha / initial_mass[nz]

    seed_wt = np.zeros((n_terms, n_topics), dtype=np.float64)
    pseudo = config.seed_weight * corpus.total_tokens / max(n_terms, 1)
    for k, words in enumerate(seeds.topic_words):
        for v in words:
            seed_wt[v, k] = pseudo
    seed_tt = seed_wt.sum(axis=0)

    alpha_k = np.full(n_topics, config.alpha, dtype=np.float64)
    state = ModelState(
        config=config,
        vocabulary=corpus.vocabulary,
        topic_labels=labels,
        n_seeded=seeds.n_seeded,
        alpha_k=alpha_k,
        eps_k=eps_k,
        _word_topic_real=word_topic,
        _seed_word_topic=seed_wt,
        topic_total_real=topic_total,
        seed_topic_total=seed_tt,
        z=z,
        doc_topic=doc_topic,
        token_word=token_word,
        doc_start=doc_start,
        prev_doc=corpus.predecessor_indices(),
        doc_ids=[d.id for d in corpus.documents],
        rng=rng,
        seed_patterns=seeds.patterns,
        _wt_base=seed_wt + config.beta,
        _tt_base=seed_tt + n_terms * config.beta,
    )
    return state


def sweep(
    state: ModelState,
    docs: tuple[int, int] | None = None,
    rng: RngStream | None = None,
    record_delta: bool = False,
) -> int | None:
    """One Gibbs sweep over a contiguous document range, in place.

    Each token is removed from the counts, a new topic is drawn from
    the collapsed conditional, and the counts are restored.  With
    ``record_delta`` the number of tokens that changed topic is
    returned.  Uses (and advances) the state's own stream unless an
    explicit one is given.
    """
    if state.z is None:
        raise RuntimeError("model was loaded without document state")
    if docs is None:
        docs = (0, state.doc_topic.shape[0])
    lo, hi = docs
    if not (0 <= lo <= hi <= state.doc_topic.shape[0]):
        raise ValueError(f"document range {docs} out of bounds")
    stream = rng if rng is not None else state.rng
    ranges = np.array([[lo, hi]], dtype=np.int64)
    changed = gibbs_sweeps(
        state.token_word,
        state.doc_start,
        ranges,
        state.z,
        state.doc_topic,
        state._word_topic_real,
        state._wt_base,
        state.topic_total_real,
        state._tt_base,
        state.alpha_k,
        float(state.config.gamma),
        state.prev_doc,
        stream.state,
        1,
        record_delta,
    )
    return int(changed) if record_delta else None


def adjust_priors(state: ModelState, topic_deltas: np.ndarray) -> np.ndarray:
    """One adjustment step of the per-topic priors, in place.

    Each prior moves by its step size times the net change in its
    topic's token total since the last adjustment.  The result is then
    projected back onto the constraint set: no prior below the floor
    ``(1 - nu) * alpha``, and the sum exactly ``k * alpha`` (entries at
    the floor stay put; the rest rescale).  With ``nu = 0`` the priors
    are returned untouched.
    """
    config = state.config
    if config.nu == 0.0:
        return state.alpha_k
    deltas = np.asarray(topic_deltas, dtype=np.float64)
    if deltas.shape != state.alpha_k.shape:
        raise ValueError("topic_deltas must have one entry per topic")
    proposed = state.alpha_k + state.eps_k * deltas
    floor = (1.0 - config.nu) * config.alpha
    target = config.k * config.alpha

    clamped = proposed < floor
    x = proposed.copy()
    for _ in range(config.k + 1):
        if clamped.all():
            x[:] = floor
            logger.warning(
                "all topic priors hit the floor %.6g; their sum cannot be "
                "preserved this step",
                floor,
            )
            break
        x[clamped] = floor
        free = ~clamped
        remaining = target - floor * clamped.sum()
        scale = remaining / proposed[free].sum()
        x[free] = proposed[free] * scale
        newly = free & (x < floor)
        if not newly.any():
            break
        clamped |= newly
    state.alpha_k[:] = x
    return state.alpha_k


def check_convergence(delta_history: list[int]) -> bool:
    """True when fitting should stop.

    The change counts of a mixing chain fall while topics are still
    reorganizing and flatten into noise once they are not; the first
    rise therefore marks convergence.  Fewer than two entries always
    continue.
    """
    if len(delta_history) < 2:
        return False
    return delta_history[-1] > delta_history[-2]


def fit_serial(
    corpus: Corpus,
    config: ModelConfig,
    seeds: SeedAssignment | None = None,
) -> tuple[ModelState, FitReport]:
    """Fit on a single worker.

    Identical to :func:`asymlda.fit` with ``workers=1`` by
    construction: it runs the same driver.
    """
    from .parallel import fit as _fit

    return _fit(corpus, replace(config, workers=1), seeds)
