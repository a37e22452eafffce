"""Baselines (query words, top-K' relevance words), evaluation metrics
(fidelity, new-word counts, query overlap, rank shift, explanation-document
similarity), the batch harness, and parameter sweeps.

A pair counts toward fidelity iff the edited document's rank is strictly
better than the original rank under the same model with frozen corpus
statistics. Aggregates are plain sums over the per-pair records in record
order, so an external pass over the report can reproduce them exactly.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from . import cf_engine, pipeline, retrieval
from .corpus import Document, InvertedIndex, Query
from .pipeline import PipelineSettings, Resources
from .retrieval import EmbeddingTable, RankedList

RANK_FLOOR = 10  # pairs must start below this rank
RANK_CEILING = 100
DOCS_PER_QUERY = 5
N_QUERIES = 50
TOPK_PRIME_DOCS = 5  # relevance set is drawn from this many top documents
TOPK_PRIME_WORDS = 10  # k'

METHODS = ("cfir", "qw", "topk")

REPORT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TestPair:
    __test__ = False  # not a pytest class, despite the name

    query_id: str
    doc_id: str
    original_rank: int


def baseline_qw(query: Query, doc: Document) -> Counter:
    """Add each query word missing from the document, once."""
    present = set(doc.tokens)
    return Counter({t: 1 for t in set(query.tokens) if t not in present})


def relevance_set(ranked: RankedList, docs_by_id: dict[str, Document],
                  index: InvertedIndex, k_prime: int = TOPK_PRIME_WORDS) -> list[str]:
    """Top-k' words by aggregate tf-idf over the top documents of the list."""
    weights: dict[str, float] = {}
    for doc_id in ranked.top_ids(TOPK_PRIME_DOCS):
        for token, tf in docs_by_id[doc_id].counts().items():
            df = index.doc_freq.get(token, 0)
            if df:
                weights[token] = weights.get(token, 0.0) + tf * math.log(
                    index.corpus_size / df
                )
    ordered = sorted(weights.items(), key=lambda e: (-e[1], e[0]))
    return [w for w, _ in ordered[:k_prime]]


def baseline_topk(query: Query, ranked: RankedList, doc: Document,
                  docs_by_id: dict[str, Document], index: InvertedIndex,
                  k_prime: int = TOPK_PRIME_WORDS) -> Counter:
    """Add relevance-set words missing from the document, once each."""
    present = set(doc.tokens)
    rel = relevance_set(ranked, docs_by_id, index, k_prime)
    return Counter({w: 1 for w in rel if w not in present})


def query_overlap_pct(explanation: Counter, query: Query) -> float | None:
    """100 * |explanation types in the query| / |explanation types|;
    undefined for empty explanations."""
    if not explanation:
        return None
    types = set(explanation)
    return 100.0 * len(types & set(query.tokens)) / len(types)


def explanation_similarity(doc: Document, explanation: Counter,
                           table: EmbeddingTable) -> float | None:
    """Cosine between the mean embedding of the document tokens and the mean
    embedding of the explanation words (with multiplicity); OOV words are
    skipped, and an empty side makes the value undefined."""
    doc_vecs = [table.vectors[t] for t in doc.tokens if t in table.vectors]
    exp_vecs = []
    for word in sorted(explanation):
        if word in table.vectors:
            exp_vecs.extend([table.vectors[word]] * explanation[word])
    if not doc_vecs or not exp_vecs:
        return None
    a = np.mean(np.stack(doc_vecs), axis=0)
    b = np.mean(np.stack(exp_vecs), axis=0)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return None
    return float(a @ b / (na * nb))


def fidelity(records: list[dict]) -> float:
    """100 * improved / total over the given records."""
    if not records:
        raise ValueError("fidelity needs at least one record")
    improved = sum(1 for r in records if r["improved"])
    return 100.0 * improved / len(records)


def avg_new_words(records: list[dict]) -> float:
    return sum(r["new_word_types"] for r in records) / len(records)


def avg_query_overlap(records: list[dict]) -> float | None:
    vals = [r["query_overlap_pct"] for r in records if r["query_overlap_pct"] is not None]
    if not vals:
        return None
    return sum(vals) / len(vals)


def rank_shift(records: list[dict]) -> float | None:
    """Mean (old rank - new rank) over improved pairs; absent without any."""
    shifts = [r["old_rank"] - r["new_rank"] for r in records if r["improved"]]
    if not shifts:
        return None
    return sum(shifts) / len(shifts)


def avg_similarity(records: list[dict]) -> float | None:
    vals = [r["similarity"] for r in records if r.get("similarity") is not None]
    if not vals:
        return None
    return sum(vals) / len(vals)


def select_test_pairs(
    res: Resources,
    queries: list[Query],
    seed: int,
    n_queries: int = N_QUERIES,
    docs_per_query: int = DOCS_PER_QUERY,
    rank_floor: int = RANK_FLOOR,
    rank_ceiling: int = RANK_CEILING,
) -> tuple[list[TestPair], list[str]]:
    """First n_queries queries, docs_per_query documents sampled (seeded) from
    the retrieved entries at ranks rank_floor+1..rank_ceiling. Unretrieved
    documents padding the tail of the list with zero scores are not real
    results and are not eligible. Queries without eligible documents are
    reported as skipped."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(9,)))
    pairs: list[TestPair] = []
    skipped: list[str] = []
    for query in queries[:n_queries]:
        retrieved = res.corpus_scores(query)
        ranked = res.ranked(query, rank_ceiling)
        eligible = [
            (rank_floor + i + 1, entry[0])
            for i, entry in enumerate(ranked.entries[rank_floor:rank_ceiling])
            if entry[0] in retrieved
        ]
        if not eligible:
            skipped.append(query.query_id)
            continue
        take = min(docs_per_query, len(eligible))
        picks = rng.choice(len(eligible), size=take, replace=False)
        for i in picks:
            orig_rank, doc_id = eligible[int(i)]
            pairs.append(TestPair(query.query_id, doc_id, orig_rank))
    return pairs, skipped


def _base_record(method: str, pair: TestPair, query: Query) -> dict:
    return {
        "method": method,
        "query_id": pair.query_id,
        "doc_id": pair.doc_id,
        "old_rank": pair.original_rank,
        "new_rank": pair.original_rank,
        "improved": False,
        "explanation": {},
        "new_word_types": 0,
        "new_word_tokens": 0,
        "query_overlap_pct": None,
        "similarity": None,
        "error": None,
    }


def _finish_record(record: dict, explanation: Counter, new_rank: int, new_score: float,
                   query: Query, doc: Document, table: EmbeddingTable | None) -> dict:
    record["new_rank"] = new_rank
    record["new_score"] = new_score
    record["improved"] = new_rank < record["old_rank"]
    record["explanation"] = {w: explanation[w] for w in sorted(explanation)}
    record["new_word_types"] = len(explanation)
    record["new_word_tokens"] = sum(explanation.values())
    record["query_overlap_pct"] = query_overlap_pct(explanation, query)
    if table is not None:
        record["similarity"] = explanation_similarity(doc, explanation, table)
    return record


def evaluate_pair(
    res: Resources,
    settings: PipelineSettings,
    query: Query,
    pair: TestPair,
    seed: int,
) -> list[dict]:
    """CFIR plus both baselines on one pair; a pipeline failure marks the
    CFIR record failed instead of aborting the batch."""
    doc = res.docs_by_id[pair.doc_id]
    records = []

    record = _base_record("cfir", pair, query)
    try:
        outcome = pipeline.run_pair(res, settings, query, pair.doc_id, seed)
        _finish_record(record, outcome.result.explanation, outcome.new_rank,
                       outcome.new_score, query, doc, res.table)
        record["cf"] = {
            "seed": seed,
            "success": outcome.result.success,
            "add_only_found": outcome.result.add_only_found,
            "flipped": outcome.result.flipped,
            "attempts": outcome.result.attempts,
            "loss_trace": [float(v) for v in outcome.result.loss_trace],
            "vocab_size": len(outcome.vocab),
            "d_vec": {
                outcome.vocab.words[j]: int(v)
                for j, v in enumerate(outcome.d_vec) if v > 0
            },
            "chosen": None if outcome.result.chosen is None else {
                outcome.vocab.words[j]: int(v)
                for j, v in enumerate(outcome.result.chosen) if v > 0
            },
        }
    except Exception as exc:  # noqa: BLE001 - batch keeps going per contract
        record["error"] = f"{type(exc).__name__}: {exc}"
        record["cf"] = None
    records.append(record)

    ranked = res.ranked(query)
    for method, explanation in (
        ("qw", baseline_qw(query, doc)),
        ("topk", baseline_topk(query, ranked, doc, res.docs_by_id, res.index)),
    ):
        record = _base_record(method, pair, query)
        modified = cf_engine.apply_explanation(doc, explanation)
        new_rank, new_score = res.modified_rank(query, modified)
        _finish_record(record, explanation, new_rank, new_score, query, doc, res.table)
        records.append(record)
    return records


def aggregate(records: list[dict]) -> dict:
    return {
        "pairs": len(records),
        "improved": sum(1 for r in records if r["improved"]),
        "fd": fidelity(records),
        "avg_new_words": avg_new_words(records),
        "avg_query_overlap": avg_query_overlap(records),
        "avg_rank_shift": rank_shift(records),
        "avg_similarity": avg_similarity(records),
    }


def evaluate_run(
    res: Resources,
    settings: PipelineSettings,
    queries: list[Query],
    seed: int,
    pairs: list[TestPair] | None = None,
    n_queries: int = N_QUERIES,
    docs_per_query: int = DOCS_PER_QUERY,
    jobs: int = 1,
) -> dict:
    """Evaluate CFIR and both baselines over the pair set and aggregate."""
    queries_by_id = {q.query_id: q for q in queries}
    skipped: list[str] = []
    if pairs is None:
        pairs, skipped = select_test_pairs(
            res, queries, seed, n_queries=n_queries, docs_per_query=docs_per_query
        )
    jobs_args = [
        (queries_by_id[p.query_id], p, _pair_seed(seed, i)) for i, p in enumerate(pairs)
    ]
    if jobs > 1:
        record_groups = _parallel_pairs(res, settings, jobs_args, jobs)
    else:
        record_groups = [
            evaluate_pair(res, settings, query, pair, pair_seed)
            for query, pair, pair_seed in jobs_args
        ]
    records = [r for group in record_groups for r in group]

    by_method = {m: [r for r in records if r["method"] == m] for m in METHODS}
    aggregates = {m: aggregate(by_method[m]) for m in METHODS if by_method[m]}
    failures = sum(1 for r in records if r["error"] is not None)
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "seed": seed,
        "model": res.scorer.name,
        "pairs": [
            {"query_id": p.query_id, "doc_id": p.doc_id, "original_rank": p.original_rank}
            for p in pairs
        ],
        "skipped_queries": skipped,
        "failures": failures,
        "records": records,
        "aggregates": aggregates,
    }


def _pair_seed(run_seed: int, pair_index: int) -> int:
    ss = np.random.SeedSequence(entropy=run_seed, spawn_key=(1, pair_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _parallel_pairs(res, settings, jobs_args, jobs):
    from concurrent.futures import ProcessPoolExecutor

    global _WORKER_STATE
    _WORKER_STATE = (res, settings)
    try:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_worker_pair, jobs_args))
    finally:
        _WORKER_STATE = None


_WORKER_STATE = None


def _worker_pair(args):
    query, pair, pair_seed = args
    res, settings = _WORKER_STATE
    return evaluate_pair(res, settings, query, pair, pair_seed)


def sweep(
    res: Resources,
    settings: PipelineSettings,
    queries: list[Query],
    seed: int,
    parameter: str,
    values: list[int],
    n_queries: int = N_QUERIES,
    docs_per_query: int = DOCS_PER_QUERY,
) -> list[dict]:
    """One full evaluation per parameter value; rows suitable for CSV."""
    field_by_param = {"topk": "k_top", "nwords": "n_words", "cf-k": "cf_k",
                      "cf_k": "cf_k"}
    if parameter not in field_by_param:
        raise ValueError(f"sweep parameter must be one of {sorted(field_by_param)}")
    rows = []
    for value in values:
        swept = replace(settings, **{field_by_param[parameter]: int(value)})
        report = evaluate_run(res, swept, queries, seed,
                              n_queries=n_queries, docs_per_query=docs_per_query)
        for method, agg in report["aggregates"].items():
            rows.append({
                "parameter": parameter,
                "value": int(value),
                "method": method,
                "model": report["model"],
                "k_top": swept.k_top,
                "n_words": swept.n_words,
                "cf_k": swept.cf_k,
                "pairs": agg["pairs"],
                "improved": agg["improved"],
                "fd": agg["fd"],
                "avg_new_words": agg["avg_new_words"],
                "avg_query_overlap": agg["avg_query_overlap"],
                "avg_rank_shift": agg["avg_rank_shift"],
            })
    return rows


SWEEP_CSV_COLUMNS = [
    "parameter", "value", "method", "model", "k_top", "n_words", "cf_k",
    "pairs", "improved", "fd", "avg_new_words", "avg_query_overlap",
    "avg_rank_shift",
]


def write_sweep_csv(fh, rows: list[dict]) -> None:
    import csv

    writer = csv.DictWriter(fh, fieldnames=SWEEP_CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
