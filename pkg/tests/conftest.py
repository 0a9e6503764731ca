"""Shared builders for hand-constructed corpora and model states."""

import numpy as np
import pytest

from asymlda.corpus import Corpus, Document, Vocabulary
from asymlda.model import ModelConfig, ModelState


def make_vocab(n_or_terms):
    """Vocabulary from a term list or of n placeholder terms w0..w{n-1}."""
    if isinstance(n_or_terms, int):
        terms = [f"w{i}" for i in range(n_or_terms)]
    else:
        terms = list(n_or_terms)
    return Vocabulary(terms)


def make_corpus(
    doc_word_ids,
    n_terms=None,
    parents=None,
    labels=None,
    metas=None,
    ids=None,
):
    """Corpus from explicit word-id lists, one list per document.

    parents: list of (parent_id, seq_index) or None per doc.
    """
    if n_terms is None:
        n_terms = max((max(ws) for ws in doc_word_ids if ws), default=-1) + 1
    vocab = make_vocab(n_terms)
    docs = []
    for i, ws in enumerate(doc_word_ids):
        pid, seq = (None, 0)
        if parents is not None and parents[i] is not None:
            pid, seq = parents[i]
        docs.append(
            Document(
                id=ids[i] if ids else f"d{i}",
                word_ids=np.asarray(ws, dtype=np.int32),
                parent_id=pid,
                seq_index=seq,
                label=labels[i] if labels else None,
                metadata=dict(metas[i]) if metas and metas[i] else {},
            )
        )
    return Corpus(docs, vocab)


def build_state(
    word_topic,
    doc_topic,
    alpha=0.5,
    beta=0.1,
    gamma=0.0,
    seed_word_topic=None,
    prev_doc=None,
    topic_labels=None,
    n_seeded=0,
    **config_kwargs,
):
    """ModelState around explicit (K, V) count matrices.

    word_topic / seed_word_topic are given topic-major for readability
    and stored transposed. alpha may be a scalar or a per-topic vector.
    """
    wt = np.asarray(word_topic, dtype=np.float64)
    k, v = wt.shape
    dt = np.asarray(doc_topic, dtype=np.float64)
    assert dt.shape[1] == k
    alpha_k = np.full(k, float(alpha)) if np.isscalar(alpha) else np.asarray(alpha, dtype=np.float64)
    config = ModelConfig(
        k=k,
        alpha=float(np.mean(alpha_k)),
        beta=beta,
        gamma=gamma,
        **config_kwargs,
    )
    seed = (
        np.zeros((v, k))
        if seed_word_topic is None
        else np.asarray(seed_word_topic, dtype=np.float64).T.copy()
    )
    wt_vk = wt.T.copy()
    lengths = dt.sum(axis=1).astype(np.int64)
    doc_start = np.zeros(dt.shape[0] + 1, dtype=np.int64)
    np.cumsum(lengths, out=doc_start[1:])
    return ModelState(
        config=config,
        vocabulary=make_vocab(v),
        topic_labels=list(topic_labels) if topic_labels else [f"other{i}" for i in range(k)],
        n_seeded=n_seeded,
        alpha_k=alpha_k.copy(),
        eps_k=np.zeros(k),
        _word_topic_real=wt_vk,
        _seed_word_topic=seed,
        topic_total_real=wt_vk.sum(axis=0),
        seed_topic_total=seed.sum(axis=0),
        doc_topic=dt,
        doc_start=doc_start,
        prev_doc=(
            None
            if prev_doc is None
            else np.asarray(prev_doc, dtype=np.int64)
        ),
        _wt_base=seed + beta,
        _tt_base=seed.sum(axis=0) + v * beta,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
