"""Per-pair orchestration: rank, build vocabulary and surrogate dataset,
train the local classifier, search for a counterfactual, rescore the edited
document. Shared by the explain command and the evaluation harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cf_engine, classifier, importance, retrieval, surrogate
from .cf_engine import CfConfig
from .corpus import Document, InvertedIndex, Query
from .importance import ImportanceStrategy
from .retrieval import RankedList

RANK_CUTOFF = 100  # candidate pool depth for pair selection and reporting

MIN_CAP = 3.0  # per-coordinate floor for the search box


@dataclass
class PipelineSettings:
    k_top: int = 10
    n_words: int = 10
    strategy: str = "tfidf"
    classifier_kind: str = "lr"  # lr | rf
    cf_k: int = 3
    lambda1: float = 1.0
    lambda2: float = 0.5
    max_iter: int = 500
    step: float = 0.05
    lr_rate: float = 0.001
    lr_epochs: int = 1000
    rf_estimators: int = 100
    rf_depth: int = 10


class Resources:
    """Read-only shared state for one run: documents, index, scorer, neighbor
    search, and per-query score caches."""

    def __init__(self, docs, index: InvertedIndex, scorer, table=None):
        self.docs = list(docs)
        self.docs_by_id = {d.doc_id: d for d in self.docs}
        self.index = index
        self.scorer = scorer
        self.table = table
        self.neighbors = surrogate.TfidfNeighbors(self.docs, index)
        self._score_cache: dict[str, dict[str, float]] = {}

    def corpus_scores(self, query: Query) -> dict[str, float]:
        cached = self._score_cache.get(query.query_id)
        if cached is None:
            cached = self.scorer.scores_for(query)
            self._score_cache[query.query_id] = cached
        return cached

    def ranked(self, query: Query, cutoff: int = RANK_CUTOFF) -> RankedList:
        return retrieval.rank_from_scores(
            query.query_id,
            self.scorer.name,
            self.corpus_scores(query),
            self.scorer.all_doc_ids_sorted(),
            cutoff,
        )

    def original_rank(self, query: Query, doc_id: str) -> int:
        scores = self.corpus_scores(query)
        return retrieval.position_of(
            scores, self.scorer.all_doc_ids_sorted(), doc_id, scores.get(doc_id, 0.0)
        )

    def modified_rank(self, query: Query, modified: Document) -> tuple[int, float]:
        """Rank of an edited document against frozen corpus scores."""
        new_score = self.scorer.score_doc(query, modified)
        scores = self.corpus_scores(query)
        new_rank = retrieval.position_of(
            scores, self.scorer.all_doc_ids_sorted(), modified.doc_id, new_score
        )
        return new_rank, new_score


def coordinate_caps(positives: np.ndarray, d_vec: np.ndarray) -> np.ndarray:
    """Per-coordinate bound for the candidate box: at least MIN_CAP, at least
    the largest top-K term count, and at least the target's own count (so the
    original vector always lies inside the box)."""
    top_max = positives.max(axis=0) if positives.size else np.zeros_like(d_vec)
    return np.maximum(np.maximum(MIN_CAP, top_max), d_vec)


@dataclass
class PairOutcome:
    query_id: str
    doc_id: str
    original_rank: int
    ranked: RankedList
    vocab: importance.Vocabulary
    dataset: surrogate.SurrogateDataset
    model: object
    d_vec: np.ndarray
    result: cf_engine.CounterfactualResult
    modified: Document
    new_rank: int
    new_score: float
    already_top_k: bool = False


def run_pair(
    res: Resources,
    settings: PipelineSettings,
    query: Query,
    doc_id: str,
    seed: int,
) -> PairOutcome:
    """Full counterfactual pipeline for one (query, document) pair."""
    target = res.docs_by_id.get(doc_id)
    if target is None:
        raise ValueError(f"unknown doc_id: {doc_id!r}")
    cutoff = max(RANK_CUTOFF, settings.k_top)
    ranked = res.ranked(query, cutoff)
    orig_rank = res.original_rank(query, doc_id)

    strategy = ImportanceStrategy(kind=settings.strategy, n=settings.n_words)
    top_ids = ranked.top_ids(settings.k_top)
    if len(top_ids) < settings.k_top:
        raise ValueError(
            f"query {query.query_id!r}: ranked list has {len(top_ids)} entries, "
            f"need {settings.k_top}"
        )
    top_docs = [res.docs_by_id[d] for d in top_ids]
    vocab = importance.build_vocabulary(top_docs, query, strategy, res.index, res.table)
    dataset = surrogate.build_dataset(
        target, ranked, settings.k_top, vocab, res.docs_by_id, res.neighbors
    )

    if settings.classifier_kind == "lr":
        model = classifier.fit_logistic(
            dataset.features, dataset.labels,
            learning_rate=settings.lr_rate, epochs=settings.lr_epochs,
        )
    elif settings.classifier_kind == "rf":
        model = classifier.fit_forest(
            dataset.features, dataset.labels,
            n_estimators=settings.rf_estimators, max_depth=settings.rf_depth,
            seed=seed,
        )
    else:
        raise ValueError(f"unknown classifier kind {settings.classifier_kind!r}")

    d_vec = surrogate.vectorize(target, vocab)
    positives = dataset.features[dataset.labels == 1]
    cfg = CfConfig(
        k=settings.cf_k,
        lambda1=settings.lambda1,
        lambda2=settings.lambda2,
        max_iter=settings.max_iter,
        step=settings.step,
        caps=coordinate_caps(positives, d_vec),
        seed=seed,
    )
    result = cf_engine.generate(model, d_vec, cfg, vocab)

    modified = cf_engine.apply_explanation(target, result.explanation)
    new_rank, new_score = res.modified_rank(query, modified)
    return PairOutcome(
        query_id=query.query_id,
        doc_id=doc_id,
        original_rank=orig_rank,
        ranked=ranked,
        vocab=vocab,
        dataset=dataset,
        model=model,
        d_vec=d_vec,
        result=result,
        modified=modified,
        new_rank=new_rank,
        new_score=new_score,
        already_top_k=orig_rank <= settings.k_top,
    )
