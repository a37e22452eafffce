"""Per-document important-word selection and the union vocabulary that
defines the feature space for the local classifier."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Document, InvertedIndex, Query
from .retrieval import EmbeddingTable

STRATEGY_KINDS = ("tfidf", "embed_sim", "keybert")


@dataclass(frozen=True)
class ImportanceStrategy:
    kind: str = "tfidf"
    n: int = 10

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown importance strategy {self.kind!r}")
        if self.n < 1:
            raise ValueError(f"strategy n must be >= 1, got {self.n}")


@dataclass(frozen=True)
class Vocabulary:
    """Distinct words ordered by descending aggregate importance (ties by
    token); `position` is the inverse of `words`."""

    words: tuple[str, ...]
    position: dict[str, int]

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_words(cls, words: list[str]) -> "Vocabulary":
        return cls(words=tuple(words), position={w: i for i, w in enumerate(words)})


def _mean_query_vector(query: Query, table: EmbeddingTable) -> np.ndarray | None:
    vecs = [table.vectors[t] for t in query.tokens if t in table.vectors]
    if not vecs:
        return None
    return np.mean(np.stack(vecs), axis=0)


def _scored_tokens(
    doc: Document,
    query: Query,
    strategy: ImportanceStrategy,
    index: InvertedIndex,
    table: EmbeddingTable | None,
) -> list[tuple[str, float]]:
    if strategy.kind == "keybert":
        raise NotImplementedError(
            "the 'keybert' importance strategy is a reserved slot and is not implemented"
        )
    counts = doc.counts()
    if strategy.kind == "tfidf":
        n_docs = index.corpus_size
        scored = []
        for token, tf in counts.items():
            df = index.doc_freq.get(token, 0)
            weight = tf * math.log(n_docs / df) if df else 0.0
            scored.append((token, weight))
        return scored
    # embed_sim: cosine between the token vector and the mean query vector.
    if table is None:
        raise ValueError("embed_sim importance strategy requires an embedding table")
    q_mean = _mean_query_vector(query, table)
    q_norm = float(np.linalg.norm(q_mean)) if q_mean is not None else 0.0
    scored = []
    for token in counts:
        unit = table.unit(token)
        if unit is None:
            scored.append((token, -2.0))  # below any real cosine
        elif q_norm == 0.0:
            scored.append((token, 0.0))
        else:
            scored.append((token, float(unit @ (q_mean / q_norm))))
    return scored


def important_words(
    doc: Document,
    query: Query,
    strategy: ImportanceStrategy,
    index: InvertedIndex,
    table: EmbeddingTable | None = None,
) -> list[str]:
    """Top-n distinct tokens of `doc` under the strategy score; fewer if the
    document has fewer distinct tokens."""
    if not doc.tokens:
        raise ValueError(f"cannot rank words of empty document {doc.doc_id!r}")
    scored = _scored_tokens(doc, query, strategy, index, table)
    scored.sort(key=lambda e: (-e[1], e[0]))
    return [token for token, _ in scored[: strategy.n]]


def build_vocabulary(
    top_docs: list[Document],
    query: Query,
    strategy: ImportanceStrategy,
    index: InvertedIndex,
    table: EmbeddingTable | None = None,
) -> Vocabulary:
    """Union of the per-document top-n word sets over the top-K documents,
    ordered by descending aggregate importance (ties lexicographic)."""
    if not top_docs:
        raise ValueError("vocabulary needs at least one top-ranked document")
    aggregate: dict[str, float] = {}
    for doc in top_docs:
        scored = dict(_scored_tokens(doc, query, strategy, index, table))
        for word in important_words(doc, query, strategy, index, table):
            aggregate[word] = aggregate.get(word, 0.0) + scored[word]
    ordered = sorted(aggregate.items(), key=lambda e: (-e[1], e[0]))
    return Vocabulary.from_words([w for w, _ in ordered])
