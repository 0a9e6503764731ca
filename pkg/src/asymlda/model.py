"""Model configuration, sampling state, and serialization.

The sampling state keeps four count structures:

* ``doc_topic`` (D, K): tokens of document d assigned to topic k,
* a (V, K) real word-topic count matrix (integer-valued floats),
* a (V, K) fixed matrix of seed pseudo-counts,
* per-topic totals for both.

Probabilities always combine real counts with seed pseudo-counts.  A
topic's word distribution phi is (count + pseudo + beta) normalized;
a document's topic distribution theta is (count + alpha) normalized.
Real counts and pseudo-counts are kept separate so the sampler only
ever adds and subtracts whole numbers, which keeps parallel merges
exactly equal to serial updates.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Vocabulary

__all__ = [
    "FitReport",
    "ModelConfig",
    "ModelFormatError",
    "ModelState",
    "load_model",
    "save_model",
]

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised for unreadable or incompatible model files."""


@dataclass(frozen=True)
class ModelConfig:
    """Fitting hyperparameters.

    ``max_iter`` counts Gibbs sweeps over the corpus.  Workers
    synchronize and priors adjust every 10 sweeps, so ``max_iter`` must
    be a positive multiple of 10.  ``gamma`` scales how much topic mass
    a document inherits from its chain predecessor; ``nu`` controls
    both the step size of the per-topic prior adjustment and the floor
    ``(1 - nu) * alpha`` below which no prior may fall.  ``nu = 0``
    disables adjustment entirely and the priors stay symmetric.
    """

    k: int
    alpha: float = 0.5
    beta: float = 0.1
    gamma: float = 0.0
    nu: float = 0.0
    seed_weight: float = 0.01
    max_iter: int = 2000
    batch_size: float = 0.01
    workers: int = 1
    auto_stop: bool = False
    predict_iter: int = 100
    rng_seed: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError("k must be a positive integer")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.nu < 1.0:
            raise ValueError("nu must lie in [0, 1)")
        if self.seed_weight < 0:
            raise ValueError("seed_weight must be non-negative")
        if self.max_iter < 10 or self.max_iter % 10 != 0:
            raise ValueError("max_iter must be a positive multiple of 10 sweeps")
        if not 0.0 < self.batch_size <= 1.0:
            raise ValueError("batch_size must lie in (0, 1]")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ValueError("workers must be a positive integer")
        if self.predict_iter < 1:
            raise ValueError("predict_iter must be a positive integer")


@dataclass(eq=False)
class ModelState:
    """Counts, priors and labels of a model, during and after fitting.

    States returned by :func:`asymlda.load_model` carry no per-token
    arrays (``z``, ``doc_topic`` and friends are None); they support
    prediction and inspection but not further fitting.
    """

    config: ModelConfig
    vocabulary: Vocabulary
    topic_labels: list[str]
    n_seeded: int
    alpha_k: np.ndarray
    eps_k: np.ndarray
    _word_topic_real: np.ndarray  # (V, K) integer-valued
    _seed_word_topic: np.ndarray  # (V, K) fixed pseudo-counts
    topic_total_real: np.ndarray  # (K,)
    seed_topic_total: np.ndarray  # (K,)
    # training-only arrays
    z: np.ndarray | None = None
    doc_topic: np.ndarray | None = None  # (D, K) int32
    token_word: np.ndarray | None = None
    doc_start: np.ndarray | None = None
    prev_doc: np.ndarray | None = None
    doc_ids: list[str] | None = None
    rng: object | None = None
    seed_patterns: dict[str, list[str]] | None = None
    _wt_base: np.ndarray | None = field(default=None, repr=False)
    _tt_base: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_topics(self) -> int:
        return int(self.alpha_k.shape[0])

    @property
    def n_terms(self) -> int:
        return int(self._word_topic_real.shape[0])

    @property
    def n_docs(self) -> int:
        if self.doc_topic is None:
            raise RuntimeError("model was loaded without document state")
        return int(self.doc_topic.shape[0])

    @property
    def topic_word_counts(self) -> np.ndarray:
        """(K, V) word-topic counts including seed pseudo-counts."""
        return (self._word_topic_real + self._seed_word_topic).T

    @property
    def seed_counts(self) -> np.ndarray:
        """(K, V) fixed seed pseudo-counts."""
        return self._seed_word_topic.T

    @property
    def topic_totals(self) -> np.ndarray:
        """(K,) token counts per topic including seed mass."""
        return self.topic_total_real + self.seed_topic_total

    def doc_length(self, d: int) -> int:
        if self.doc_start is None:
            raise RuntimeError("model was loaded without document state")
        return int(self.doc_start[d + 1] - self.doc_start[d])

    def effective_alpha(self, d: int) -> np.ndarray:
        """Document prior for d, including any carry-over from its
        chain predecessor (scaled by gamma)."""
        if self.doc_topic is None:
            raise RuntimeError("model was loaded without document state")
        a = self.alpha_k.copy()
        gamma = self.config.gamma
        if gamma > 0.0 and self.prev_doc is not None:
            p = int(self.prev_doc[d])
            if p >= 0:
                a += gamma * self.alpha_k.sum() * self.theta(p)
        return a

    def theta(self, d: int) -> np.ndarray:
        """Topic distribution of document d under the current counts."""
        if self.doc_topic is None:
            raise RuntimeError("model was loaded without document state")
        m = self.doc_topic[d].astype(np.float64)
        return (m + self.alpha_k) / (m.sum() + self.alpha_k.sum())

    def theta_matrix(self) -> np.ndarray:
        if self.doc_topic is None:
            raise RuntimeError("model was loaded without document state")
        m = self.doc_topic.astype(np.float64)
        return (m + self.alpha_k) / (
            m.sum(axis=1, keepdims=True) + self.alpha_k.sum()
        )

    def phi(self, k: int) -> np.ndarray:
        """Word distribution of topic k (counts plus seeds, smoothed)."""
        beta = self.config.beta
        num = self._word_topic_real[:, k] + self._seed_word_topic[:, k] + beta
        den = (
            self.topic_total_real[k]
            + self.seed_topic_total[k]
            + self.n_terms * beta
        )
        return num / den

    def phi_matrix(self) -> np.ndarray:
        """(K, V) matrix of all topic word distributions."""
        beta = self.config.beta
        num = self._word_topic_real + self._seed_word_topic + beta
        den = self.topic_total_real + self.seed_topic_total + self.n_terms * beta
        return (num / den).T

    def sampling_weights(self, d: int, v: int) -> np.ndarray:
        """Unnormalized topic weights for resampling one token of word v
        in document d.

        Call with the token already removed from the counts (the
        sampler decrements before drawing); the weights then follow the
        collapsed conditional: effective document prior times smoothed
        word probability.
        """
        if self.doc_topic is None:
            raise RuntimeError("model was loaded without document state")
        beta = self.config.beta
        a = self.effective_alpha(d)
        num = self._word_topic_real[v] + self._seed_word_topic[v] + beta
        den = self.topic_total_real + self.seed_topic_total + self.n_terms * beta
        return (self.doc_topic[d] + a) * num / den

    def top_terms(self, k: int, n: int = 10) -> list[tuple[str, float]]:
        """The n highest-probability terms of topic k.

        Deterministic: probability ties resolve to the lower
        vocabulary index.
        """
        p = self.phi(k)
        order = np.lexsort((np.arange(p.shape[0]), -p))
        return [(self.vocabulary.term(int(i)), float(p[i])) for i in order[:n]]

    def label_index(self, label: str) -> int:
        try:
            return self.topic_labels.index(label)
        except ValueError:
            raise KeyError(f"unknown topic label: {label!r}")

    def digest(self) -> str:
        """Hash of counts, priors and assignments, for determinism checks."""
        h = hashlib.sha256()
        h.update(self.alpha_k.tobytes())
        h.update(self._word_topic_real.tobytes())
        h.update(self.topic_total_real.tobytes())
        if self.z is not None:
            h.update(self.z.tobytes())
        if self.doc_topic is not None:
            h.update(np.ascontiguousarray(self.doc_topic).tobytes())
        return h.hexdigest()


@dataclass
class FitReport:
    """What a fitting run did: length, stopping, priors over time.

    ``delta_history`` holds, for each 10-sweep block, the number of
    tokens whose topic changed between the block's last two sweeps.
    ``alpha_trajectory`` has one row per block plus the initial row.
    """

    iterations_run: int
    delta_history: list[int]
    alpha_trajectory: np.ndarray
    elapsed_seconds: float
    converged_early: bool
    workers: int
    topic_labels: list[str]

    @property
    def alpha_final(self) -> np.ndarray:
        return self.alpha_trajectory[-1]

    def to_rows(self) -> list[tuple[str, str]]:
        rows = [
            ("iterations_run", str(self.iterations_run)),
            ("converged_early", str(self.converged_early).lower()),
            ("elapsed_seconds", f"{self.elapsed_seconds:.3f}"),
            ("workers", str(self.workers)),
        ]
        for i, d in enumerate(self.delta_history):
            rows.append((f"delta_sweep_{(i + 1) * 10}", str(d)))
        for i, row in enumerate(self.alpha_trajectory):
            sweeps = i * 10
            for label, val in zip(self.topic_labels, row):
                rows.append((f"alpha_sweep_{sweeps}[{label}]", f"{val:.6f}"))
        return rows


def _sparse_triplets(matrix_vk: np.ndarray) -> list[list]:
    """Nonzero entries of a (V, K) matrix as [topic, word, value] rows."""
    vs, ks = np.nonzero(matrix_vk)
    return [
        [int(k), int(v), float(matrix_vk[v, k])] for v, k in zip(vs, ks)
    ]


def save_model(state: ModelState, path: str | Path) -> None:
    """Write a model as JSON: config, vocabulary, labels, priors, and
    sparse count triplets.  Loadable models support prediction and
    inspection; the per-token training state is not persisted."""
    combined = state._word_topic_real + state._seed_word_topic
    payload = {
        "format_version": FORMAT_VERSION,
        "config": asdict(state.config),
        "vocabulary": list(state.vocabulary.terms),
        "topic_labels": list(state.topic_labels),
        "n_seeded": state.n_seeded,
        "alpha_k": [float(x) for x in state.alpha_k],
        "eps_k": [float(x) for x in state.eps_k],
        "seed_counts": _sparse_triplets(state._seed_word_topic),
        "topic_word_counts": _sparse_triplets(combined),
    }
    if state.seed_patterns:
        payload["seed_patterns"] = state.seed_patterns
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def _dense_from_triplets(
    triplets: Sequence[Sequence], n_terms: int, n_topics: int, what: str
) -> np.ndarray:
    out = np.zeros((n_terms, n_topics), dtype=np.float64)
    for row in triplets:
        if len(row) != 3:
            raise ModelFormatError(f"{what}: expected [topic, word, value] rows")
        k, v, val = int(row[0]), int(row[1]), float(row[2])
        if not (0 <= k < n_topics and 0 <= v < n_terms):
            raise ModelFormatError(f"{what}: index out of range in row {row}")
        out[v, k] = val
    return out


def load_model(path: str | Path) -> ModelState:
    """Read a model written by :func:`save_model`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: not a model file: {e}")
    if not isinstance(payload, dict):
        raise ModelFormatError(f"{path}: not a model file")
    version = payload.get("format_version")
    if not isinstance(version, int):
        raise ModelFormatError(f"{path}: missing format_version")
    if version > FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: format version {version} is newer than supported "
            f"version {FORMAT_VERSION}"
        )
    try:
        known = {f.name for f in fields(ModelConfig)}
        raw_config = {
            k: v for k, v in payload["config"].items() if k in known
        }
        config = ModelConfig(**raw_config)
        vocabulary = Vocabulary(payload["vocabulary"])
        topic_labels = [str(x) for x in payload["topic_labels"]]
        n_seeded = int(payload["n_seeded"])
        alpha_k = np.asarray(payload["alpha_k"], dtype=np.float64)
        eps_k = np.asarray(payload["eps_k"], dtype=np.float64)
        n_topics = config.k
        n_terms = len(vocabulary)
        seed = _dense_from_triplets(
            payload["seed_counts"], n_terms, n_topics, "seed_counts"
        )
        combined = _dense_from_triplets(
            payload["topic_word_counts"], n_terms, n_topics, "topic_word_counts"
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f"{path}: malformed model file: {e}")
    if len(topic_labels) != n_topics or alpha_k.shape[0] != n_topics:
        raise ModelFormatError(f"{path}: topic arrays disagree with k={n_topics}")
    real = combined - seed
    if real.size and real.min() < -1e-6:
        raise ModelFormatError(f"{path}: counts fall below seed pseudo-counts")
    real = np.rint(np.maximum(real, 0.0))
    patterns = payload.get("seed_patterns")
    if patterns is not None and not isinstance(patterns, dict):
        raise ModelFormatError(f"{path}: seed_patterns must be an object")
    if patterns is not None:
        patterns = {str(k): [str(p) for p in v] for k, v in patterns.items()}
    return ModelState(
        config=config,
        vocabulary=vocabulary,
        topic_labels=topic_labels,
        n_seeded=n_seeded,
        alpha_k=alpha_k,
        eps_k=eps_k,
        _word_topic_real=real,
        _seed_word_topic=seed,
        topic_total_real=real.sum(axis=0),
        seed_topic_total=seed.sum(axis=0),
        seed_patterns=patterns,
    )
