"""Held-out inference: document classification and perplexity.

Prediction runs collapsed Gibbs over the test documents' tokens with
the trained word-topic weights frozen; only the per-document topic
counts move.  Words outside the model vocabulary are dropped.  A
document's label is the topic with the largest share of its final
topic distribution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import RngStream, derive_stream, predict_sweeps, random_topic_fill
from .corpus import Corpus
from .model import ModelState

__all__ = [
    "PredictResult",
    "load_predictions",
    "perplexity",
    "predict",
    "save_predictions",
]

# Stream tag for prediction; far from the worker tags (1 + worker).
_PREDICT_TAG = 1 << 20


@dataclass
class PredictResult:
    """Per-document topic distributions and chosen labels."""

    doc_ids: list[str]
    theta: np.ndarray
    topic_index: np.ndarray
    labels: list[str]

    def as_mapping(self) -> dict[str, str]:
        return dict(zip(self.doc_ids, self.labels))


def _map_test_tokens(
    state: ModelState, test: Corpus
) -> tuple[np.ndarray, np.ndarray]:
    """Rewrite test tokens as model vocabulary ids, dropping unknowns.

    Returns flattened ``(token_word, doc_start)`` over the test
    documents; documents whose words are all unknown come out empty.
    """
    mapping = np.array(
        [
            -1 if (i := state.vocabulary.id(t)) is None else i
            for t in test.vocabulary.terms
        ],
        dtype=np.int64,
    )
    tokens, doc_start = test.flatten()
    n_docs = len(test)
    if tokens.shape[0] == 0:
        return np.zeros(0, dtype=np.int32), doc_start.copy()
    mapped = mapping[tokens]
    keep = mapped >= 0
    token_doc = np.repeat(np.arange(n_docs, dtype=np.int64), np.diff(doc_start))
    lengths = np.bincount(token_doc[keep], minlength=n_docs)
    new_start = np.zeros(n_docs + 1, dtype=np.int64)
    np.cumsum(lengths, out=new_start[1:])
    return mapped[keep].astype(np.int32), new_start


def predict(
    state: ModelState,
    test: Corpus,
    iterations: int | None = None,
    rng: RngStream | int | None = None,
    seeded_only: bool = False,
) -> PredictResult:
    """Infer topic distributions for held-out documents.

    The model is read-only here: its counts and priors do not change.
    Chains in the test corpus feed the same sequential document prior
    used during fitting (scaled by the model's gamma).  With
    ``seeded_only`` the label is chosen among seeded topics only; the
    full distribution is always returned.  Ties take the lower topic
    index.  Documents with no known words get the prior distribution.
    """
    if seeded_only and state.n_seeded == 0:
        raise ValueError("seeded_only requires a model with seeded topics")
    n_topics = state.n_topics
    iterations = state.config.predict_iter if iterations is None else iterations
    if iterations < 1:
        raise ValueError("iterations must be a positive integer")
    if isinstance(rng, RngStream):
        stream = rng
    else:
        seed = state.config.rng_seed if rng is None else int(rng)
        stream = derive_stream(seed, _PREDICT_TAG)

    token_word, doc_start = _map_test_tokens(state, test)
    n_docs = len(test)
    doc_topic = np.zeros((n_docs, n_topics), dtype=np.int32)
    if token_word.shape[0]:
        z = np.empty(token_word.shape[0], dtype=np.int32)
        random_topic_fill(z, n_topics, stream.state)
        token_doc = np.repeat(
            np.arange(n_docs, dtype=np.int64), np.diff(doc_start)
        )
        doc_topic += (
            np.bincount(
                token_doc * n_topics + z, minlength=n_docs * n_topics
            )
            .reshape(n_docs, n_topics)
            .astype(np.int32)
        )
        phi_vk = np.ascontiguousarray(state.phi_matrix().T)
        predict_sweeps(
            token_word,
            doc_start,
            z,
            doc_topic,
            phi_vk,
            state.alpha_k,
            float(state.config.gamma),
            test.predecessor_indices(),
            stream.state,
            iterations,
        )

    lengths = np.diff(doc_start).astype(np.float64)
    theta = (doc_topic + state.alpha_k) / (
        lengths[:, None] + state.alpha_k.sum()
    )
    scores = theta[:, : state.n_seeded] if seeded_only else theta
    topic_index = np.argmax(scores, axis=1)
    labels = [state.topic_labels[int(i)] for i in topic_index]
    return PredictResult(
        doc_ids=[d.id for d in test.documents],
        theta=theta,
        topic_index=topic_index,
        labels=labels,
    )


def perplexity(state: ModelState, test: Corpus, theta: np.ndarray) -> float:
    """Held-out perplexity of the test corpus under the model.

    Token probabilities mix the model's topic word distributions with
    the given per-document topic distributions (one row per test
    document, e.g. from :func:`predict`).  Unknown words are excluded
    from the token count.  Lower is better; a model with uniform word
    distributions scores exactly the vocabulary size.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (len(test), state.n_topics):
        raise ValueError(
            f"theta must have shape ({len(test)}, {state.n_topics}), "
            f"got {theta.shape}"
        )
    token_word, doc_start = _map_test_tokens(state, test)
    n_scorable = int(token_word.shape[0])
    if n_scorable == 0:
        raise ValueError("no scorable tokens: test corpus shares no vocabulary")
    phi_vk = state.phi_matrix().T  # (V, K)
    log_likelihood = 0.0
    for d in range(len(test)):
        t0, t1 = doc_start[d], doc_start[d + 1]
        if t1 == t0:
            continue
        p = phi_vk[token_word[t0:t1]] @ theta[d]
        log_likelihood += float(np.log(p).sum())
    return float(np.exp(-log_likelihood / n_scorable))


def save_predictions(result: PredictResult, path: str | Path) -> None:
    """Write predictions as JSON lines: id, label, topic distribution."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, doc_id in enumerate(result.doc_ids):
            rec = {
                "id": doc_id,
                "label": result.labels[i],
                "theta": [round(float(x), 6) for x in result.theta[i]],
            }
            fh.write(json.dumps(rec) + "\n")


def load_predictions(path: str | Path) -> dict[str, str]:
    """Read a predictions file back as an id-to-label mapping."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path} line {ln}: invalid JSON: {e.msg}")
            if "id" not in rec or "label" not in rec:
                raise ValueError(f"{path} line {ln}: missing id or label")
            out[str(rec["id"])] = str(rec["label"])
    return out
