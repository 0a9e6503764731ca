"""Corpus ingestion and seed dictionaries.

Documents are short token sequences (typically sentences) that may be
chained: a document with ``parent_id`` set belongs to an ordered chain
of documents sharing that parent, in file order.  The chain structure
feeds the sequential prior during sampling, so it is validated here
once and for all: sequence positions within a parent must be
contiguous from zero.

The corpus file format is JSON lines.  Each record carries::

    {"id": "doc-1", "text": "raw text ..."}            # or
    {"id": "doc-1", "tokens": ["already", "split"]}

plus optional ``parent_id``, ``label`` (gold class for evaluation) and
``meta`` (string-to-string mapping).  Exactly one of ``text`` and
``tokens`` must be present.  Unknown fields are ignored.

Seed dictionaries map topic labels to word patterns.  A pattern is a
literal term or a prefix ending in ``*``; multi-word patterns are
matched during preprocessing and merged into single underscore-joined
tokens so they act as ordinary vocabulary terms afterwards.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "CorpusFormatError",
    "Corpus",
    "Document",
    "PreprocessOptions",
    "RawDoc",
    "SeedAssignment",
    "SeedDictionary",
    "Vocabulary",
    "build_corpus",
    "compound_multiwords",
    "load_corpus",
    "load_stopwords",
    "match_seeds",
    "save_corpus",
    "save_seed_dictionary",
    "split_sentences",
    "tokenize",
]


class CorpusFormatError(ValueError):
    """Raised for malformed corpus or seed dictionary files."""


# Word characters plus internal apostrophes/hyphens; punctuation splits.
_TOKEN_RE = re.compile(r"[\w'-]+")
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class PreprocessOptions:
    """Tokenization settings shared by fitting and prediction."""

    lowercase: bool = True
    stopwords: frozenset[str] = frozenset()


def tokenize(text: str, options: PreprocessOptions | None = None) -> list[str]:
    """Split raw text into cleaned tokens.

    Tokens are maximal runs of word characters (plus internal ``'`` and
    ``-``); surrounding apostrophes and hyphens are stripped.  Tokens
    without a single alphabetic character (bare numbers, stray
    punctuation) are dropped, as are stop words.  Lowercasing happens
    before the stop-word check.
    """
    options = options or PreprocessOptions()
    raw = _TOKEN_RE.findall(text)
    return _clean_tokens(raw, options)


def _clean_tokens(raw: Iterable[str], options: PreprocessOptions) -> list[str]:
    out = []
    for tok in raw:
        tok = tok.strip("'-")
        if not tok:
            continue
        if options.lowercase:
            tok = tok.lower()
        if not any(c.isalpha() for c in tok):
            continue
        if tok in options.stopwords:
            continue
        out.append(tok)
    return out


def split_sentences(text: str) -> list[str]:
    """Naive sentence splitter on terminal punctuation.

    Good enough to turn paragraph-shaped input into per-sentence
    documents; callers with real segmentation needs should split
    upstream and supply one record per sentence.
    """
    parts = [p.strip() for p in _SENTENCE_RE.split(text)]
    return [p for p in parts if p]


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stop-word file, one word per line, ``#`` comments allowed."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


class Vocabulary:
    """Immutable term list with first-appearance ordering.

    Index i maps to ``terms[i]``; lookups go through :meth:`id`.
    """

    __slots__ = ("terms", "_index")

    def __init__(self, terms: Sequence[str]):
        self.terms: tuple[str, ...] = tuple(terms)
        self._index: dict[str, int] = {t: i for i, t in enumerate(self.terms)}
        if len(self._index) != len(self.terms):
            raise CorpusFormatError("vocabulary contains duplicate terms")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self.terms)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.terms == other.terms

    def id(self, term: str) -> int | None:
        """Vocabulary index of ``term``, or None if absent."""
        return self._index.get(term)

    def term(self, i: int) -> str:
        return self.terms[i]

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} terms)"


@dataclass(eq=False)
class Document:
    """One document: an id and its tokens as vocabulary indices.

    ``seq_index`` is the position within the parent chain (0 when the
    document has no parent).  ``label`` is an optional gold class used
    only by evaluation.  Empty documents are legal and contribute
    nothing to fitting, but keep their place in chains and output.
    """

    id: str
    word_ids: np.ndarray
    parent_id: str | None = None
    seq_index: int = 0
    label: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.word_ids = np.asarray(self.word_ids, dtype=np.int32)

    def __len__(self) -> int:
        return int(self.word_ids.size)


class RawDoc(NamedTuple):
    """Pre-vocabulary document record accepted by :func:`build_corpus`."""

    id: str
    tokens: Sequence[str]
    parent_id: str | None = None
    metadata: Mapping[str, str] | None = None
    label: str | None = None


class Corpus:
    """An ordered document collection plus its vocabulary.

    Construction validates the invariants sampling relies on: word ids
    in range, non-negative lengths, and contiguous sequence positions
    within each parent chain.
    """

    def __init__(self, documents: Sequence[Document], vocabulary: Vocabulary):
        self.documents: list[Document] = list(documents)
        self.vocabulary = vocabulary
        self._validate()
        self.total_tokens: int = int(sum(len(d) for d in self.documents))
        self._flat: tuple[np.ndarray, np.ndarray] | None = None

    def _validate(self) -> None:
        v = len(self.vocabulary)
        seen: dict[str, int] = {}
        chains: dict[str, list[int]] = {}
        for d in self.documents:
            if d.id in seen:
                raise CorpusFormatError(f"duplicate document id: {d.id!r}")
            seen[d.id] = 1
            if d.word_ids.size:
                lo = int(d.word_ids.min())
                hi = int(d.word_ids.max())
                if lo < 0 or hi >= v:
                    raise CorpusFormatError(
                        f"document {d.id!r} has word id outside [0, {v})"
                    )
            if d.parent_id is not None:
                chains.setdefault(d.parent_id, []).append(d.seq_index)
        for parent, seqs in chains.items():
            if sorted(seqs) != list(range(len(seqs))):
                raise CorpusFormatError(
                    f"parent {parent!r} has non-contiguous sequence positions {sorted(seqs)}"
                )

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def doc_lengths(self) -> np.ndarray:
        return np.array([len(d) for d in self.documents], dtype=np.int64)

    def predecessor_indices(self) -> np.ndarray:
        """Index of each document's predecessor in its chain, -1 if none.

        The predecessor of a document at chain position s is the chain
        member at position s - 1.  Documents always appear after their
        predecessor in the corpus, which sampling requires so that a
        predecessor's topic counts are fresh within a sweep.
        """
        pos: dict[tuple[str, int], int] = {}
        for i, d in enumerate(self.documents):
            if d.parent_id is not None:
                pos[(d.parent_id, d.seq_index)] = i
        prev = np.full(len(self.documents), -1, dtype=np.int64)
        for i, d in enumerate(self.documents):
            if d.parent_id is not None and d.seq_index > 0:
                j = pos[(d.parent_id, d.seq_index - 1)]
                if j >= i:
                    raise CorpusFormatError(
                        f"document {d.id!r} appears before its chain predecessor"
                    )
                prev[i] = j
        return prev

    def flatten(self) -> tuple[np.ndarray, np.ndarray]:
        """Concatenated token word ids and per-document offsets.

        Returns ``(token_word, doc_start)`` where document d owns the
        slice ``token_word[doc_start[d]:doc_start[d + 1]]``.
        """
        if self._flat is None:
            lengths = self.doc_lengths()
            doc_start = np.zeros(len(self.documents) + 1, dtype=np.int64)
            np.cumsum(lengths, out=doc_start[1:])
            if self.total_tokens:
                token_word = np.concatenate(
                    [d.word_ids for d in self.documents if len(d)]
                ).astype(np.int32, copy=False)
            else:
                token_word = np.zeros(0, dtype=np.int32)
            self._flat = (token_word, doc_start)
        return self._flat

    def __repr__(self) -> str:
        return (
            f"Corpus({len(self.documents)} documents, "
            f"{self.total_tokens} tokens, V={len(self.vocabulary)})"
        )


def build_corpus(docs: Iterable[RawDoc | tuple], min_count: int = 1) -> Corpus:
    """Assemble a corpus from tokenized records.

    The vocabulary keeps terms whose corpus frequency is at least
    ``min_count``, ordered by first appearance; rarer terms are removed
    from documents entirely (positions collapse, they are not masked).
    Sequence positions within each parent chain follow record order.
    Raises if every document ends up empty.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    records = [d if isinstance(d, RawDoc) else RawDoc(*d) for d in docs]

    freq: dict[str, int] = {}
    first: dict[str, int] = {}
    n_seen = 0
    for rec in records:
        for tok in rec.tokens:
            if tok not in freq:
                freq[tok] = 0
                first[tok] = n_seen
                n_seen += 1
            freq[tok] += 1

    kept = [t for t in sorted(first, key=first.get) if freq[t] >= min_count]
    vocab = Vocabulary(kept)

    seq_counter: dict[str, int] = {}
    documents = []
    for rec in records:
        ids = [vocab.id(t) for t in rec.tokens]
        word_ids = np.array([i for i in ids if i is not None], dtype=np.int32)
        seq = 0
        if rec.parent_id is not None:
            seq = seq_counter.get(rec.parent_id, 0)
            seq_counter[rec.parent_id] = seq + 1
        documents.append(
            Document(
                id=rec.id,
                word_ids=word_ids,
                parent_id=rec.parent_id,
                seq_index=seq,
                label=rec.label,
                metadata=dict(rec.metadata or {}),
            )
        )
    corpus = Corpus(documents, vocab)
    if corpus.total_tokens == 0:
        raise CorpusFormatError("corpus has no tokens after preprocessing")
    return corpus


class SeedDictionary:
    """Ordered mapping of topic labels to word patterns.

    The text format groups patterns under ``[Label]`` section headers,
    one pattern per line; ``#`` starts a comment.  A JSON object of
    label-to-pattern-list also loads.  Patterns are lowercased; a
    trailing ``*`` makes the last (or only) word a prefix match.
    """

    def __init__(self, entries: Mapping[str, Sequence[str]]):
        self.entries: dict[str, list[str]] = {}
        for label, patterns in entries.items():
            label = str(label).strip()
            if not label:
                raise CorpusFormatError("seed dictionary has an empty topic label")
            if label in self.entries:
                raise CorpusFormatError(f"duplicate seed topic label: {label!r}")
            cleaned = [" ".join(str(p).lower().split()) for p in patterns]
            cleaned = [p for p in cleaned if p]
            if not cleaned:
                raise CorpusFormatError(f"seed topic {label!r} has no patterns")
            self.entries[label] = cleaned

    @property
    def labels(self) -> list[str]:
        return list(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def multiword_patterns(self) -> list[tuple[str, ...]]:
        """All multi-word patterns as word tuples, for compounding."""
        out = []
        for patterns in self.entries.values():
            for p in patterns:
                words = tuple(p.split())
                if len(words) > 1:
                    out.append(words)
        return out

    @classmethod
    def from_file(cls, path: str | Path) -> "SeedDictionary":
        text = Path(path).read_text(encoding="utf-8")
        stripped = text.lstrip()
        if stripped.startswith("{"):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"seed dictionary {path}: invalid JSON: {e}")
            if not isinstance(data, dict):
                raise CorpusFormatError(f"seed dictionary {path}: expected an object")
            return cls(
                {k: v if isinstance(v, list) else [v] for k, v in data.items()}
            )
        entries: dict[str, list[str]] = {}
        current: str | None = None
        for ln, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                if not current:
                    raise CorpusFormatError(f"{path} line {ln}: empty section label")
                if current in entries:
                    raise CorpusFormatError(
                        f"{path} line {ln}: duplicate section {current!r}"
                    )
                entries[current] = []
            elif current is None:
                raise CorpusFormatError(
                    f"{path} line {ln}: pattern before any [Topic] section"
                )
            else:
                entries[current].append(line)
        if not entries:
            raise CorpusFormatError(f"seed dictionary {path} is empty")
        return cls(entries)


@dataclass
class SeedAssignment:
    """Resolved seed sets: per seeded topic, the matching vocabulary ids.

    Topic k of the model corresponds to ``labels[k]`` for k below
    ``n_seeded``; later topics are unseeded.  A vocabulary id may sit in
    several topics' sets (overlapping patterns seed all of them).
    ``patterns`` keeps the source patterns so a saved model can rebuild
    the compounding rules for held-out text.
    """

    labels: list[str]
    topic_words: list[frozenset[int]]
    patterns: dict[str, list[str]] | None = None

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.topic_words):
            raise ValueError("labels and topic_words must align")
        for words in self.topic_words:
            if any(v < 0 for v in words):
                raise ValueError("seed word ids must be non-negative")

    @property
    def n_seeded(self) -> int:
        return len(self.labels)

    @classmethod
    def empty(cls) -> "SeedAssignment":
        return cls(labels=[], topic_words=[])


def _pattern_matches(pattern: str, term: str) -> bool:
    if pattern.endswith("*"):
        return term.startswith(pattern[:-1])
    return term == pattern


def match_seeds(vocabulary: Vocabulary, dictionary: SeedDictionary) -> SeedAssignment:
    """Resolve seed patterns against a vocabulary.

    Multi-word patterns match their underscore-joined compound form.
    Matching is independent per topic: a term matched by patterns of
    several topics seeds all of them.  Topics whose patterns match
    nothing keep their label with an empty set (and a warning).
    """
    labels = []
    topic_words = []
    for label, patterns in dictionary.entries.items():
        normalized = [p.replace(" ", "_") for p in patterns]
        matched = set()
        for vid, term in enumerate(vocabulary.terms):
            if any(_pattern_matches(p, term) for p in normalized):
                matched.add(vid)
        labels.append(label)
        topic_words.append(frozenset(matched))
        if not matched:
            logger.warning(
                "seed topic %r matched no vocabulary terms; it will behave "
                "like an unseeded topic",
                label,
            )
    patterns = {label: list(pats) for label, pats in dictionary.entries.items()}
    return SeedAssignment(labels=labels, topic_words=topic_words, patterns=patterns)


def compound_multiwords(
    tokens: Sequence[str], dictionary: SeedDictionary | None
) -> list[str]:
    """Merge runs of tokens matching multi-word seed patterns.

    Matching is greedy left to right, longest pattern first; each
    pattern word matches exactly, except a trailing ``*`` word which
    matches by prefix.  Matched runs are joined with underscores using
    the surface tokens (so ``international court*`` over
    ``["international", "courts"]`` yields ``international_courts``).
    """
    if dictionary is None:
        return list(tokens)
    patterns = sorted(set(dictionary.multiword_patterns()), key=len, reverse=True)
    if not patterns:
        return list(tokens)
    out = []
    i = 0
    n = len(tokens)
    while i < n:
        merged = None
        for pat in patterns:
            m = len(pat)
            if i + m > n:
                continue
            window = tokens[i : i + m]
            if all(_pattern_matches(p, t) for p, t in zip(pat, window)):
                merged = "_".join(window)
                i += m
                break
        if merged is None:
            out.append(tokens[i])
            i += 1
        else:
            out.append(merged)
    return out


def save_seed_dictionary(dictionary: SeedDictionary, path: str | Path) -> None:
    """Write a seed dictionary in the sectioned text format."""
    lines = []
    for label, patterns in dictionary.entries.items():
        lines.append(f"[{label}]")
        lines.extend(patterns)
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def _parse_jsonl_record(
    line: str, ln: int, options: PreprocessOptions, dictionary: SeedDictionary | None
) -> RawDoc | None:
    line = line.strip()
    if not line:
        return None
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"line {ln}: invalid JSON: {e.msg}")
    if not isinstance(rec, dict):
        raise CorpusFormatError(f"line {ln}: expected an object")
    if "id" not in rec or not isinstance(rec["id"], str) or not rec["id"]:
        raise CorpusFormatError(f"line {ln}: missing or invalid 'id'")
    has_text = "text" in rec
    has_tokens = "tokens" in rec
    if has_text == has_tokens:
        raise CorpusFormatError(
            f"line {ln}: record must have exactly one of 'text' or 'tokens'"
        )
    if has_text:
        if not isinstance(rec["text"], str):
            raise CorpusFormatError(f"line {ln}: 'text' must be a string")
        tokens = tokenize(rec["text"], options)
    else:
        if not isinstance(rec["tokens"], list) or not all(
            isinstance(t, str) for t in rec["tokens"]
        ):
            raise CorpusFormatError(f"line {ln}: 'tokens' must be a list of strings")
        tokens = _clean_tokens(rec["tokens"], options)
    tokens = compound_multiwords(tokens, dictionary)

    parent = rec.get("parent_id")
    if parent is not None and not isinstance(parent, str):
        raise CorpusFormatError(f"line {ln}: 'parent_id' must be a string")
    label = rec.get("label")
    if label is not None and not isinstance(label, str):
        raise CorpusFormatError(f"line {ln}: 'label' must be a string")
    meta = rec.get("meta") or {}
    if not isinstance(meta, dict):
        raise CorpusFormatError(f"line {ln}: 'meta' must be an object")
    meta = {str(k): str(v) for k, v in meta.items()}
    return RawDoc(rec["id"], tokens, parent, meta, label)


def load_corpus(
    path: str | Path,
    options: PreprocessOptions | None = None,
    seed_dictionary: SeedDictionary | None = None,
    min_count: int = 1,
) -> Corpus:
    """Read a JSON-lines corpus file.

    ``seed_dictionary`` supplies multi-word patterns for compounding;
    pass the same dictionary used for fitting when preparing held-out
    text, otherwise compound terms cannot line up with the model
    vocabulary.  Malformed records raise with their line number.
    """
    options = options or PreprocessOptions()
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            rec = _parse_jsonl_record(line, ln, options, seed_dictionary)
            if rec is not None:
                records.append(rec)
    if not records:
        raise CorpusFormatError(f"{path}: no documents")
    return build_corpus(records, min_count=min_count)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as JSON lines with explicit token lists.

    Round-trips through :func:`load_corpus` with ``min_count=1``: token
    lists, vocabulary order, chains, labels and metadata all survive.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for d in corpus.documents:
            rec: dict = {
                "id": d.id,
                "tokens": [corpus.vocabulary.term(int(i)) for i in d.word_ids],
            }
            if d.parent_id is not None:
                rec["parent_id"] = d.parent_id
            if d.label is not None:
                rec["label"] = d.label
            if d.metadata:
                rec["meta"] = d.metadata
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
