"""Training data for the local top-K-membership classifier: term-frequency
vectors over the vocabulary, top-K documents as class 1, and the target's
nearest non-top-K neighbors as class 0."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Document, InvertedIndex
from .importance import Vocabulary
from .retrieval import RankedList


def vectorize(doc: Document, vocab: Vocabulary) -> np.ndarray:
    """Term-frequency vector of `doc` over the vocabulary; words outside the
    vocabulary are ignored. Linear under document concatenation."""
    vec = np.zeros(len(vocab), dtype=np.float64)
    position = vocab.position
    for token in doc.tokens:
        j = position.get(token)
        if j is not None:
            vec[j] += 1.0
    return vec


class TfidfNeighbors:
    """Cosine neighbor search over tf-idf vectors in the full token space
    (idf = ln(N/df)). Norms are precomputed once per corpus; per-target
    similarity is accumulated through the postings lists."""

    def __init__(self, docs: list[Document], index: InvertedIndex):
        self.index = index
        self._idf = {
            t: math.log(index.corpus_size / df) for t, df in index.doc_freq.items()
        }
        self._norms: dict[str, float] = {}
        for doc in docs:
            sq = 0.0
            for token, tf in doc.counts().items():
                w = tf * self._idf[token]
                sq += w * w
            self._norms[doc.doc_id] = math.sqrt(sq)

    def doc_ids(self):
        return self._norms.keys()

    def similarities(self, target: Document) -> dict[str, float]:
        """Cosine similarity of every document sharing a token with target."""
        acc: dict[str, float] = {}
        for token, tf in target.counts().items():
            idf = self._idf.get(token)
            if idf is None or idf == 0.0:
                continue
            w_target = tf * idf
            for doc_id, doc_tf in self.index.postings[token]:
                acc[doc_id] = acc.get(doc_id, 0.0) + w_target * doc_tf * idf
        t_norm = self._norms.get(target.doc_id) or math.sqrt(
            sum((tf * self._idf.get(t, 0.0)) ** 2 for t, tf in target.counts().items())
        )
        if t_norm == 0.0:
            return {}
        sims = {}
        for doc_id, dot in acc.items():
            norm = self._norms[doc_id]
            if norm > 0.0:
                sims[doc_id] = dot / (t_norm * norm)
        return sims


def select_negatives(
    target: Document,
    ranked: RankedList,
    k_top: int,
    neighbors: TfidfNeighbors,
) -> list[str]:
    """The k_top documents outside the ranked top-K closest to the target by
    tf-idf cosine. The target itself is always included when it lies outside
    the top-K."""
    top_ids = set(ranked.top_ids(k_top))
    outside = [d for d in neighbors.doc_ids() if d not in top_ids]
    if len(outside) < k_top:
        raise ValueError(
            f"corpus too small: only {len(outside)} documents outside the top-{k_top}"
        )
    sims = neighbors.similarities(target)
    target_outside = target.doc_id not in top_ids
    pool = [d for d in outside if d != target.doc_id]
    pool.sort(key=lambda d: (-sims.get(d, 0.0), d))
    chosen = [target.doc_id] if target_outside else []
    chosen.extend(pool[: k_top - len(chosen)])
    return chosen


@dataclass
class SurrogateDataset:
    features: np.ndarray  # shape (m, |V|), integral tf values
    labels: np.ndarray  # shape (m,), ints in {0, 1}
    doc_ids: tuple[str, ...]
    vocabulary: Vocabulary

    def dump_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(self.vocabulary.words) + ",label\n")
            for row, label in zip(self.features, self.labels):
                fh.write(",".join(str(int(v)) for v in row) + f",{int(label)}\n")


def build_dataset(
    target: Document,
    ranked: RankedList,
    k_top: int,
    vocab: Vocabulary,
    docs_by_id: dict[str, Document],
    neighbors: TfidfNeighbors,
) -> SurrogateDataset:
    """Top-K documents labeled 1, the target's nearest outside neighbors
    labeled 0; balanced by construction."""
    top_ids = ranked.top_ids(k_top)
    if len(top_ids) < k_top:
        raise ValueError(
            f"ranked list has {len(top_ids)} entries, need at least {k_top}"
        )
    neg_ids = select_negatives(target, ranked, k_top, neighbors)
    ids = list(top_ids) + list(neg_ids)
    rows = [vectorize(docs_by_id[d], vocab) for d in ids]
    labels = np.array([1] * len(top_ids) + [0] * len(neg_ids), dtype=np.int64)
    return SurrogateDataset(
        features=np.stack(rows) if rows else np.zeros((0, len(vocab))),
        labels=labels,
        doc_ids=tuple(ids),
        vocabulary=vocab,
    )
