"""Retrieval scorers (Okapi BM25, static-embedding similarity, external
bridge) behind one interface, plus deterministic ranking utilities.

All scorers expose:
    score_doc(query, doc)    score one Document against frozen corpus stats
    scores_for(query, ids)   scores for a candidate set or the whole corpus

Corpus statistics (df, idf, average length) are frozen at index build time;
a modified document is rescored with its own new term counts and length but
never perturbs the global statistics.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .corpus import Document, InvertedIndex, Query

BM25_K1 = 0.9
BM25_B = 0.4


@dataclass(frozen=True)
class RankedList:
    """Entries sorted by descending score, ties broken by ascending doc_id;
    the rank of entries[i] is i + 1."""

    query_id: str
    model_name: str
    entries: tuple[tuple[str, float], ...]

    def top_ids(self, k: int) -> list[str]:
        return [doc_id for doc_id, _ in self.entries[:k]]


def bm25_idf(corpus_size: int, df: int) -> float:
    return math.log((corpus_size - df + 0.5) / (df + 0.5) + 1.0)


def bm25_score_from_counts(
    index: InvertedIndex,
    query_tokens: Iterable[str],
    counts: Mapping[str, int],
    doc_len: int,
) -> float:
    """BM25 with the index's frozen corpus statistics but arbitrary document
    term counts and length (used to rescore edited documents)."""
    score = 0.0
    for token in query_tokens:
        tf = counts.get(token, 0)
        if tf == 0:
            continue
        df = index.doc_freq.get(token, 0)
        norm = tf + BM25_K1 * (
            1.0 - BM25_B + BM25_B * doc_len / index.avg_doc_length
        )
        score += bm25_idf(index.corpus_size, df) * tf * (BM25_K1 + 1.0) / norm
    return score


def bm25_score(index: InvertedIndex, query: Query, doc_id: str) -> float:
    if not index.has_doc(doc_id):
        raise ValueError(f"unknown doc_id: {doc_id!r}")
    counts = {t: index.tf(t, doc_id) for t in set(query.tokens)}
    return bm25_score_from_counts(index, query.tokens, counts, index.doc_length[doc_id])


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]

    def unit(self, token: str) -> np.ndarray | None:
        vec = self.vectors.get(token)
        if vec is None:
            return None
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            return None
        return vec / norm


def load_embeddings(path: str) -> EmbeddingTable:
    """Text format: optional first line `count dim`, then one
    `token v1 ... v_dim` line per word. Dimension mismatches are load errors."""
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        parts = first.split()
        if len(parts) == 2 and all(p.lstrip("-").isdigit() for p in parts):
            dim = int(parts[1])
        elif parts:
            vectors[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            dim = len(parts) - 1
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            if dim is None:
                dim = vec.size
            if vec.size != dim:
                raise ValueError(
                    f"{path}: line {lineno}: vector for {parts[0]!r} has "
                    f"{vec.size} dims, expected {dim}"
                )
            vectors[parts[0]] = vec
    if dim is None:
        raise ValueError(f"{path}: empty embedding file")
    return EmbeddingTable(dim=dim, vectors=vectors)


def embedding_score(table: EmbeddingTable, query: Query, doc: Document) -> float:
    """Mean over query tokens of the max cosine similarity to any document
    token; out-of-vocabulary tokens contribute 0."""
    if not query.tokens:
        return 0.0
    doc_units = [u for u in (table.unit(t) for t in set(doc.tokens)) if u is not None]
    if not doc_units:
        return 0.0
    doc_mat = np.stack(doc_units)
    total = 0.0
    for token in query.tokens:
        q_unit = table.unit(token)
        if q_unit is None:
            continue
        total += float(np.max(doc_mat @ q_unit))
    return total / len(query.tokens)


class Bm25Scorer:
    name = "bm25"

    def __init__(self, index: InvertedIndex):
        self.index = index
        self._sorted_ids = sorted(index.doc_length)

    def all_doc_ids_sorted(self) -> list[str]:
        return self._sorted_ids

    def score_doc(self, query: Query, doc: Document) -> float:
        return bm25_score_from_counts(self.index, query.tokens, doc.counts(), doc.length)

    def scores_for(self, query: Query, doc_ids: Iterable[str] | None = None) -> dict[str, float]:
        if doc_ids is not None:
            return {d: bm25_score(self.index, query, d) for d in doc_ids}
        # Sparse: documents sharing no query token are omitted (score 0).
        acc: dict[str, float] = {}
        idx = self.index
        for token in query.tokens:
            plist = idx.postings.get(token)
            if not plist:
                continue
            df = idx.doc_freq[token]
            idf = bm25_idf(idx.corpus_size, df)
            for doc_id, tf in plist:
                norm = tf + BM25_K1 * (
                    1.0 - BM25_B + BM25_B * idx.doc_length[doc_id] / idx.avg_doc_length
                )
                acc[doc_id] = acc.get(doc_id, 0.0) + idf * tf * (BM25_K1 + 1.0) / norm
        return acc


class EmbeddingScorer:
    name = "embed"

    def __init__(self, table: EmbeddingTable, docs: list[Document]):
        self.table = table
        self.docs = {d.doc_id: d for d in docs}
        self._sorted_ids = sorted(self.docs)
        self._doc_mats: dict[str, np.ndarray | None] = {}

    def all_doc_ids_sorted(self) -> list[str]:
        return self._sorted_ids

    def _doc_matrix(self, doc: Document) -> np.ndarray | None:
        cached = self._doc_mats.get(doc.doc_id, False)
        if cached is not False:
            return cached
        units = [u for u in (self.table.unit(t) for t in sorted(set(doc.tokens))) if u is not None]
        mat = np.stack(units) if units else None
        self._doc_mats[doc.doc_id] = mat
        return mat

    def score_doc(self, query: Query, doc: Document) -> float:
        return embedding_score(self.table, query, doc)

    def _score_indexed(self, q_units: list[np.ndarray], n_q: int, doc: Document) -> float:
        mat = self._doc_matrix(doc)
        if mat is None or not q_units:
            return 0.0
        total = 0.0
        for q_unit in q_units:
            total += float(np.max(mat @ q_unit))
        return total / n_q

    def scores_for(self, query: Query, doc_ids: Iterable[str] | None = None) -> dict[str, float]:
        ids = self._sorted_ids if doc_ids is None else list(doc_ids)
        q_units = [u for u in (self.table.unit(t) for t in query.tokens) if u is not None]
        out: dict[str, float] = {}
        for doc_id in ids:
            doc = self.docs.get(doc_id)
            if doc is None:
                raise ValueError(f"unknown doc_id: {doc_id!r}")
            out[doc_id] = self._score_indexed(q_units, len(query.tokens), doc)
        return out


def rank_from_scores(
    query_id: str,
    model_name: str,
    scores: Mapping[str, float],
    all_doc_ids_sorted: list[str],
    cutoff: int,
) -> RankedList:
    """Order by (-score, doc_id) and truncate. Documents absent from `scores`
    count as 0.0 and are appended only as far as the cutoff requires."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    ordered = sorted(scores.items(), key=lambda e: (-e[1], e[0]))
    if len(ordered) < cutoff and len(scores) < len(all_doc_ids_sorted):
        scored = set(scores)
        tail = [(d, 0.0) for d in all_doc_ids_sorted if d not in scored]
        # Zero-score docs slot after positives and before negatives.
        merged = [e for e in ordered if e[1] > 0.0]
        merged.extend(sorted(tail + [e for e in ordered if e[1] <= 0.0],
                             key=lambda e: (-e[1], e[0])))
        ordered = merged
    return RankedList(query_id=query_id, model_name=model_name,
                      entries=tuple(ordered[:cutoff]))


def rank(model, query: Query, doc_ids: Iterable[str] | None = None, cutoff: int = 100) -> RankedList:
    scores = model.scores_for(query, doc_ids)
    if doc_ids is not None:
        universe = sorted(scores)
    else:
        universe = model.all_doc_ids_sorted()
    return rank_from_scores(query.query_id, model.name, scores, universe, cutoff)


def position_of(
    scores: Mapping[str, float],
    all_doc_ids_sorted: list[str],
    target_id: str,
    target_score: float,
) -> int:
    """1-based rank of a document scoring `target_score` against the rest of
    the corpus (the target's own entry in `scores`, if any, is ignored).
    Documents missing from `scores` count as 0.0."""
    ahead = 0
    for doc_id, s in scores.items():
        if doc_id == target_id:
            continue
        if s > target_score or (s == target_score and doc_id < target_id):
            ahead += 1
    n_unscored = len(all_doc_ids_sorted) - len(scores) - (0 if target_id in scores else 1)
    if n_unscored > 0:
        if target_score < 0.0:
            ahead += n_unscored
        elif target_score == 0.0:
            below_target = bisect_left(all_doc_ids_sorted, target_id)
            scored_below = sum(1 for d in scores if d < target_id)
            ahead += below_target - scored_below
    return 1 + ahead


def rank_of(model, query: Query, doc_id: str) -> int:
    """1-based position of doc_id under a full-corpus ranking."""
    all_ids = model.all_doc_ids_sorted()
    i = bisect_left(all_ids, doc_id)
    if i >= len(all_ids) or all_ids[i] != doc_id:
        raise ValueError(f"unknown doc_id: {doc_id!r}")
    scores = model.scores_for(query)
    return position_of(scores, all_ids, doc_id, scores.get(doc_id, 0.0))


def write_trec_run(fh, ranked: RankedList, tag: str = "cfir") -> None:
    """One `query_id Q0 doc_id rank score tag` line per entry."""
    for i, (doc_id, score) in enumerate(ranked.entries, start=1):
        fh.write(f"{ranked.query_id} Q0 {doc_id} {i} {score:.6f} {tag}\n")
