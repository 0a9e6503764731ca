"""Evaluation: classification scores, frequency tables, synthetic data.

Classification is scored with micro-averaged precision, recall and F1
over a fixed class set.  Predictions outside the class set (for
example, documents landing on an unseeded topic) count as a missed
gold document but never as a false positive for any class.

The synthetic generator produces labeled corpora with the structure the
model targets: short documents in chains whose class tends to persist
from one document to the next, drawn from per-class word distributions
over a vocabulary with class-specific and shared words, and class
frequencies that can be made heavily imbalanced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, Document, SeedDictionary, Vocabulary

__all__ = [
    "ClassScore",
    "F1Report",
    "FrequencyTable",
    "SyntheticData",
    "generate_synthetic",
    "micro_f1",
    "seed_dictionary_from_distributions",
    "synthetic_word_distributions",
    "topic_frequency",
]


@dataclass(frozen=True)
class ClassScore:
    """Counts and derived scores for one class."""

    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        d = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / d if d else 0.0

    @property
    def support(self) -> int:
        return self.tp + self.fn


@dataclass(frozen=True)
class F1Report:
    classes: list[str]
    per_class: dict[str, ClassScore]
    micro_precision: float
    micro_recall: float
    micro_f1: float

    def to_rows(self) -> list[tuple[str, str]]:
        rows = [
            ("micro_precision", f"{self.micro_precision:.6f}"),
            ("micro_recall", f"{self.micro_recall:.6f}"),
            ("micro_f1", f"{self.micro_f1:.6f}"),
        ]
        for c in self.classes:
            s = self.per_class[c]
            rows += [
                (f"precision[{c}]", f"{s.precision:.6f}"),
                (f"recall[{c}]", f"{s.recall:.6f}"),
                (f"f1[{c}]", f"{s.f1:.6f}"),
                (f"support[{c}]", str(s.support)),
            ]
        return rows


def _list_ids(ids: Sequence[str], cap: int = 10) -> str:
    shown = ", ".join(repr(i) for i in list(ids)[:cap])
    more = len(ids) - min(len(ids), cap)
    return shown + (f", and {more} more" if more > 0 else "")


def micro_f1(
    predictions: Mapping[str, str],
    gold: Mapping[str, str],
    classes: Sequence[str],
) -> F1Report:
    """Micro-averaged precision/recall/F1 over pooled per-class counts.

    Every gold document must have a prediction, and every gold label
    must be one of ``classes``.  A prediction outside ``classes`` adds
    a false negative for the document's gold class and nothing else, so
    precision stays defined over in-class predictions only.  With all
    predictions in-class, micro F1 equals plain accuracy.
    """
    classes = list(classes)
    class_set = set(classes)
    if len(class_set) != len(classes):
        raise ValueError("classes contains duplicates")
    missing = [i for i in gold if i not in predictions]
    if missing:
        raise ValueError(f"no prediction for gold ids: {_list_ids(missing)}")
    bad = sorted({g for g in gold.values() if g not in class_set})
    if bad:
        raise ValueError(f"gold labels outside the class set: {bad}")

    tp = {c: 0 for c in classes}
    fp = {c: 0 for c in classes}
    fn = {c: 0 for c in classes}
    for doc_id, g in gold.items():
        p = predictions[doc_id]
        if p == g:
            tp[g] += 1
        else:
            fn[g] += 1
            if p in class_set:
                fp[p] += 1

    per_class = {c: ClassScore(tp=tp[c], fp=fp[c], fn=fn[c]) for c in classes}
    tps = sum(tp.values())
    fps = sum(fp.values())
    fns = sum(fn.values())
    precision = tps / (tps + fps) if tps + fps else 0.0
    recall = tps / (tps + fns) if tps + fns else 0.0
    # The count form rounds once, so micro F1 stays bit-equal to
    # accuracy whenever every prediction is in-class (fp == fn).
    f1 = 2 * tps / (2 * tps + fps + fns) if tps + fps + fns else 0.0
    return F1Report(
        classes=classes,
        per_class=per_class,
        micro_precision=precision,
        micro_recall=recall,
        micro_f1=f1,
    )


@dataclass(frozen=True)
class FrequencyTable:
    """Predicted-label counts, optionally split by a metadata key."""

    groups: list[str]
    labels: list[str]
    counts: np.ndarray  # (len(groups), len(labels)) int64

    def proportions(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        totals[totals == 0] = 1.0
        return self.counts / totals

    def to_rows(self) -> list[tuple[str, ...]]:
        rows = [("group", *self.labels)]
        for g, row in zip(self.groups, self.counts):
            rows.append((g, *(str(int(x)) for x in row)))
        return rows


def topic_frequency(
    predictions: Mapping[str, str],
    corpus: Corpus,
    group_key: str | None = None,
    labels: Sequence[str] | None = None,
) -> FrequencyTable:
    """Count predicted labels per group of documents.

    ``group_key`` names a document metadata key (a leading ``meta.`` is
    accepted); None pools everything into one group.  Every corpus
    document needs a prediction, and grouped documents need the key.
    """
    key = None
    if group_key:
        key = group_key.removeprefix("meta.")
    missing_pred = [d.id for d in corpus.documents if d.id not in predictions]
    if missing_pred:
        raise ValueError(f"no prediction for documents: {_list_ids(missing_pred)}")
    if key is not None:
        missing_key = [d.id for d in corpus.documents if key not in d.metadata]
        if missing_key:
            raise ValueError(
                f"documents lack metadata key {key!r}: {_list_ids(missing_key)}"
            )

    seen_labels = []
    seen_set = set()
    for d in corpus.documents:
        lab = predictions[d.id]
        if lab not in seen_set:
            seen_set.add(lab)
            seen_labels.append(lab)
    if labels is None:
        label_list = sorted(seen_labels)
    else:
        label_list = list(labels)
        extra = sorted(seen_set - set(label_list))
        label_list += extra
    label_pos = {lab: i for i, lab in enumerate(label_list)}

    if key is None:
        groups = ["all"]
        group_of = {d.id: "all" for d in corpus.documents}
    else:
        group_of = {d.id: d.metadata[key] for d in corpus.documents}
        groups = sorted(set(group_of.values()))
    group_pos = {g: i for i, g in enumerate(groups)}

    counts = np.zeros((len(groups), len(label_list)), dtype=np.int64)
    for d in corpus.documents:
        counts[group_pos[group_of[d.id]], label_pos[predictions[d.id]]] += 1
    return FrequencyTable(groups=groups, labels=label_list, counts=counts)


@dataclass
class SyntheticData:
    """A generated corpus with its ground truth."""

    corpus: Corpus
    gold: dict[str, str]
    labels: list[str]
    proportions: np.ndarray
    topic_word: np.ndarray  # (n_classes, V) generating distributions


def synthetic_word_distributions(
    n_classes: int,
    n_dedicated: int = 60,
    n_shared: int = 200,
    shared_mass: float = 0.4,
    decay: float = 1.0,
    rng: np.random.Generator | int = 0,
) -> tuple[list[str], np.ndarray]:
    """Per-class word distributions over a part-shared vocabulary.

    Each class owns ``n_dedicated`` words carrying ``1 - shared_mass``
    of its probability; all classes put the remaining ``shared_mass``
    on one common block of ``n_shared`` words with identical weights,
    so shared words carry no class signal.  Within a block, weights
    fall off as a power law with the given decay.
    """
    if not 0.0 <= shared_mass < 1.0:
        raise ValueError("shared_mass must lie in [0, 1)")
    rng = np.random.default_rng(rng)
    terms = [
        f"w{c:02d}x{i:03d}" for c in range(n_classes) for i in range(n_dedicated)
    ]
    terms += [f"shared{i:04d}" for i in range(n_shared)]
    n_terms = len(terms)
    topic_word = np.zeros((n_classes, n_terms), dtype=np.float64)
    ded_profile = 1.0 / np.arange(1, n_dedicated + 1, dtype=np.float64) ** decay
    ded_profile /= ded_profile.sum()
    if n_shared:
        shared_profile = 1.0 / np.arange(1, n_shared + 1, dtype=np.float64) ** decay
        shared_profile /= shared_profile.sum()
    for c in range(n_classes):
        lo = c * n_dedicated
        topic_word[c, lo : lo + n_dedicated] = (1.0 - shared_mass) * ded_profile
        if n_shared:
            topic_word[c, n_classes * n_dedicated :] = shared_mass * shared_profile
    # tiny random jitter so no two classes are exactly symmetric
    jitter = rng.uniform(0.999, 1.001, size=topic_word.shape)
    topic_word *= jitter
    topic_word /= topic_word.sum(axis=1, keepdims=True)
    return terms, topic_word


def seed_dictionary_from_distributions(
    topic_word: np.ndarray,
    terms: Sequence[str],
    labels: Sequence[str],
    n_words: int = 5,
) -> SeedDictionary:
    """Build a seed dictionary from generating distributions.

    Picks, per class, the words with the largest probability advantage
    over every other class, so shared words never become seeds.
    """
    n_classes = topic_word.shape[0]
    if len(labels) != n_classes:
        raise ValueError("labels must match the number of classes")
    entries: dict[str, list[str]] = {}
    for c in range(n_classes):
        others = np.delete(topic_word, c, axis=0)
        advantage = topic_word[c] - others.max(axis=0)
        order = np.lexsort((np.arange(len(terms)), -advantage))
        entries[labels[c]] = [terms[int(i)] for i in order[:n_words]]
    return SeedDictionary(entries)


def generate_synthetic(
    proportions: Sequence[float] | np.ndarray,
    topic_word: np.ndarray,
    n_docs: int,
    mean_length: float = 12.8,
    chain_length: int = 5,
    rng: np.random.Generator | int = 0,
    labels: Sequence[str] | None = None,
    terms: Sequence[str] | None = None,
    persistence: float = 0.7,
    mixture_weight: float = 0.85,
    year_range: tuple[int, int] | None = None,
) -> SyntheticData:
    """Generate a labeled corpus of chained short documents.

    Documents come in chains of ``chain_length``; the first document of
    a chain draws its class from ``proportions`` and each following
    document keeps the previous class with probability ``persistence``.
    A document of class c draws each token from class c's word
    distribution with probability ``mixture_weight`` and otherwise from
    a class sampled from ``proportions``.  Lengths are Poisson with the
    given mean (empty documents can occur and are kept).  The gold
    class is stored on each document's ``label``.  With ``year_range``
    every chain gets a uniformly drawn ``meta.year``.
    """
    proportions = np.asarray(proportions, dtype=np.float64)
    proportions = proportions / proportions.sum()
    n_classes, n_terms = topic_word.shape
    if proportions.shape[0] != n_classes:
        raise ValueError("proportions and topic_word disagree on class count")
    if chain_length < 1:
        raise ValueError("chain_length must be a positive integer")
    if not 0.0 <= persistence <= 1.0:
        raise ValueError("persistence must lie in [0, 1]")
    if not 0.0 < mixture_weight <= 1.0:
        raise ValueError("mixture_weight must lie in (0, 1]")
    rng = np.random.default_rng(rng)
    labels = list(labels) if labels is not None else [
        f"class{c}" for c in range(n_classes)
    ]
    if terms is None:
        terms = [f"term{v:05d}" for v in range(n_terms)]
    vocabulary = Vocabulary(terms)

    # document classes, chain by chain
    doc_class = np.empty(n_docs, dtype=np.int64)
    fresh = rng.choice(n_classes, size=n_docs, p=proportions)
    keep_prev = rng.random(n_docs) < persistence
    for d in range(n_docs):
        if d % chain_length == 0 or not keep_prev[d]:
            doc_class[d] = fresh[d]
        else:
            doc_class[d] = doc_class[d - 1]

    lengths = rng.poisson(mean_length, size=n_docs)
    total = int(lengths.sum())
    token_doc = np.repeat(np.arange(n_docs), lengths)
    token_class = doc_class[token_doc]
    off_topic = rng.random(total) >= mixture_weight
    token_class[off_topic] = rng.choice(
        n_classes, size=int(off_topic.sum()), p=proportions
    )
    cumulative = np.cumsum(topic_word, axis=1)
    cumulative[:, -1] = 1.0
    u = rng.random(total)
    words = np.empty(total, dtype=np.int32)
    for c in range(n_classes):
        mask = token_class == c
        words[mask] = np.searchsorted(cumulative[c], u[mask], side="right")

    n_chains = (n_docs + chain_length - 1) // chain_length
    years = None
    if year_range is not None:
        lo, hi = year_range
        years = rng.integers(lo, hi + 1, size=n_chains)

    starts = np.zeros(n_docs + 1, dtype=np.int64)
    np.cumsum(lengths, out=starts[1:])
    documents = []
    gold: dict[str, str] = {}
    for d in range(n_docs):
        chain = d // chain_length
        label = labels[int(doc_class[d])]
        meta = {"year": str(int(years[chain]))} if years is not None else {}
        doc = Document(
            id=f"d{d:06d}",
            word_ids=words[starts[d] : starts[d + 1]],
            parent_id=f"c{chain:05d}",
            seq_index=d % chain_length,
            label=label,
            metadata=meta,
        )
        documents.append(doc)
        gold[doc.id] = label
    corpus = Corpus(documents, vocabulary)
    return SyntheticData(
        corpus=corpus,
        gold=gold,
        labels=labels,
        proportions=proportions,
        topic_word=topic_word,
    )
