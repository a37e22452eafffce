import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfir.corpus import Document, Query, build_index
from cfir.retrieval import (
    BM25_B,
    BM25_K1,
    Bm25Scorer,
    EmbeddingScorer,
    EmbeddingTable,
    bm25_score,
    bm25_score_from_counts,
    embedding_score,
    load_embeddings,
    position_of,
    rank,
    rank_from_scores,
    rank_of,
    write_trec_run,
)


def brute_force_bm25(docs, query_tokens, doc_id):
    """Independent oracle: recomputes every statistic from the raw token
    lists, scoring with explicit loops."""
    n = len(docs)
    by_id = {d.doc_id: d for d in docs}
    avg_len = sum(d.length for d in docs) / n
    target = by_id[doc_id]
    score = 0.0
    for token in query_tokens:
        tf = sum(1 for t in target.tokens if t == token)
        if tf == 0:
            continue
        df = sum(1 for d in docs if token in d.tokens)
        idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
        score += idf * tf * (BM25_K1 + 1) / (
            tf + BM25_K1 * (1 - BM25_B + BM25_B * target.length / avg_len)
        )
    return score


def random_docs(rng, n_docs=20, vocab=("law", "riot", "cell", "wave", "court",
                                       "lipid", "speed", "appeal")):
    docs = []
    for i in range(n_docs):
        length = int(rng.integers(1, 12))
        toks = [vocab[int(j)] for j in rng.integers(0, len(vocab), size=length)]
        docs.append(Document(f"d{i:03d}", " ".join(toks), tuple(toks), length))
    return docs


def test_bm25_absent_token_contributes_zero(tiny_corpus):
    docs, index = tiny_corpus
    q_present = Query.from_text("q", "lipid")
    q_both = Query.from_text("q", "lipid wave")  # "wave" absent from d3
    assert bm25_score(index, q_both, "d3") == bm25_score(index, q_present, "d3")


def test_bm25_single_doc_hand_value():
    # One doc == one query word, len == avglen: the tf factor cancels and the
    # score reduces to idf = ln((1 - 1 + 0.5) / (1 + 0.5) + 1) = ln(4/3).
    docs = [Document.from_text("d1", "prohibition")]
    index = build_index(docs)
    score = bm25_score(index, Query.from_text("q", "prohibition"), "d1")
    assert score == pytest.approx(math.log(4.0 / 3.0), abs=1e-12)


def test_bm25_matches_brute_force_oracle():
    rng = np.random.default_rng(42)
    docs = random_docs(rng)
    index = build_index(docs)
    queries = ["law riot", "cell", "wave court lipid", "law law", "speed appeal wave"]
    for raw in queries:
        query = Query.from_text("q", raw)
        for doc in docs:
            mine = bm25_score(index, query, doc.doc_id)
            oracle = brute_force_bm25(docs, query.tokens, doc.doc_id)
            assert mine == pytest.approx(oracle, abs=1e-9)


def test_bm25_unknown_doc_errors(tiny_corpus):
    _, index = tiny_corpus
    with pytest.raises(ValueError, match="nope"):
        bm25_score(index, Query.from_text("q", "law"), "nope")


@given(st.integers(min_value=1, max_value=30), st.integers(min_value=1, max_value=40))
def test_bm25_monotone_in_tf_for_fixed_stats(tf, doc_len):
    docs = [Document.from_text("d1", "law riot cell"), Document.from_text("d2", "law")]
    index = build_index(docs)
    q = Query.from_text("q", "law")
    lo = bm25_score_from_counts(index, q.tokens, {"law": tf}, doc_len)
    hi = bm25_score_from_counts(index, q.tokens, {"law": tf + 1}, doc_len)
    assert hi >= lo


def _toy_table():
    e = np.eye(3)
    return EmbeddingTable(dim=3, vectors={
        "law": e[0], "riot": e[1], "cell": e[2],
        "court": np.array([0.6, 0.8, 0.0]),
    })


def test_embedding_score_identical_unit_vectors():
    table = _toy_table()
    doc = Document.from_text("d", "law riot")
    assert embedding_score(table, Query.from_text("q", "law riot"), doc) == pytest.approx(1.0)


def test_embedding_score_all_oov_is_zero():
    table = _toy_table()
    doc = Document.from_text("d", "law riot")
    assert embedding_score(table, Query.from_text("q", "unknown words"), doc) == 0.0


def test_embedding_score_hand_computed():
    table = _toy_table()
    doc = Document.from_text("d", "riot court")
    query = Query.from_text("q", "law cell")
    # law: max cos = 0.6 (court); cell: max cos = 0.0; mean = 0.3
    assert embedding_score(table, query, doc) == pytest.approx(0.3, abs=1e-9)


def test_load_embeddings_header_and_vectors(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("2 3\nlaw 1 0 0\nriot 0 1 0\n")
    table = load_embeddings(str(path))
    assert table.dim == 3
    assert np.allclose(table.vectors["law"], [1, 0, 0])


def test_load_embeddings_dim_mismatch(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("law 1 0 0\nriot 0 1\n")
    with pytest.raises(ValueError, match="riot"):
        load_embeddings(str(path))


class DictScorer:
    name = "dict"

    def __init__(self, scores, universe):
        self._scores = scores
        self._universe = sorted(universe)

    def all_doc_ids_sorted(self):
        return self._universe

    def scores_for(self, query, doc_ids=None):
        if doc_ids is None:
            return dict(self._scores)
        return {d: self._scores.get(d, 0.0) for d in doc_ids}

    def score_doc(self, query, doc):
        return self._scores[doc.doc_id]


def test_rank_sorts_descending():
    scorer = DictScorer({"d1": 2.0, "d2": 3.0}, ["d1", "d2"])
    ranked = rank(scorer, Query.from_text("q", "law"), cutoff=10)
    assert ranked.entries == (("d2", 3.0), ("d1", 2.0))


def test_rank_breaks_ties_by_doc_id():
    scorer = DictScorer({"d2": 1.0, "d1": 1.0}, ["d1", "d2"])
    ranked = rank(scorer, Query.from_text("q", "law"), cutoff=10)
    assert [d for d, _ in ranked.entries] == ["d1", "d2"]


def test_rank_cutoff_one():
    scorer = DictScorer({"d1": 2.0, "d2": 3.0}, ["d1", "d2"])
    ranked = rank(scorer, Query.from_text("q", "law"), cutoff=1)
    assert ranked.entries == (("d2", 3.0),)


def test_rank_rejects_bad_cutoff():
    scorer = DictScorer({"d1": 1.0}, ["d1"])
    with pytest.raises(ValueError, match="cutoff"):
        rank(scorer, Query.from_text("q", "law"), cutoff=0)


def test_rank_pads_with_unscored_zero_docs():
    scorer = DictScorer({"d3": 1.5}, ["d1", "d2", "d3"])
    ranked = rank(scorer, Query.from_text("q", "law"), cutoff=3)
    assert ranked.entries == (("d3", 1.5), ("d1", 0.0), ("d2", 0.0))


@given(st.dictionaries(st.sampled_from([f"d{i}" for i in range(8)]),
                       st.floats(min_value=0.1, max_value=50, allow_nan=False),
                       min_size=1))
def test_rank_invariant_under_increasing_transform(scores):
    universe = sorted(set(scores) | {"zz1", "zz2"})
    q = Query.from_text("q", "law")
    base = rank(DictScorer(scores, universe), q, cutoff=len(universe))
    squashed = {d: math.log1p(s) for d, s in scores.items()}
    other = rank(DictScorer(squashed, universe), q, cutoff=len(universe))
    assert [d for d, _ in base.entries] == [d for d, _ in other.entries]


@given(st.dictionaries(st.sampled_from([f"d{i}" for i in range(10)]),
                       st.floats(min_value=0.0, max_value=5, allow_nan=False)))
def test_position_agrees_with_materialized_ranking(scores):
    universe = [f"d{i}" for i in range(10)]
    q = Query.from_text("q", "law")
    ranked = rank(DictScorer(scores, universe), q, cutoff=10)
    order = [d for d, _ in ranked.entries]
    for doc_id in universe:
        pos = position_of(scores, universe, doc_id, scores.get(doc_id, 0.0))
        assert order[pos - 1] == doc_id


def test_rank_of_unique_highest_is_first(tiny_corpus):
    docs, index = tiny_corpus
    scorer = Bm25Scorer(index)
    q = Query.from_text("q", "lipid")
    assert rank_of(scorer, q, "d3") == 1


def test_rank_of_zero_score_unique_doc_is_last():
    scorer = DictScorer({"d1": 1.0, "d2": 2.0, "d3": 0.0}, ["d1", "d2", "d3"])
    assert rank_of(scorer, Query.from_text("q", "law"), "d3") == 3


def test_rank_of_unknown_doc_errors():
    scorer = DictScorer({"d1": 1.0}, ["d1"])
    with pytest.raises(ValueError, match="zz"):
        rank_of(scorer, Query.from_text("q", "law"), "zz")


def test_rank_of_matches_brute_force_sorted_position():
    rng = np.random.default_rng(7)
    docs = random_docs(rng, n_docs=50)
    index = build_index(docs)
    scorer = Bm25Scorer(index)
    query = Query.from_text("q", "law riot wave")
    scores = {d.doc_id: bm25_score(index, query, d.doc_id) for d in docs}
    order = sorted(scores.items(), key=lambda e: (-e[1], e[0]))
    for pos, (doc_id, _) in enumerate(order, start=1):
        assert rank_of(scorer, query, doc_id) == pos


def test_embedding_scorer_matches_embedding_score(tiny_corpus):
    docs, _ = tiny_corpus
    rng = np.random.default_rng(3)
    vocab = sorted({t for d in docs for t in d.tokens})
    table = EmbeddingTable(dim=4, vectors={
        w: rng.normal(size=4) for w in vocab
    })
    scorer = EmbeddingScorer(table, docs)
    query = Query.from_text("q", "law lipid")
    scores = scorer.scores_for(query)
    for doc in docs:
        assert scores[doc.doc_id] == pytest.approx(
            embedding_score(table, query, doc), abs=1e-12
        )


def test_trec_run_line_format(tmp_path):
    ranked = rank_from_scores("q7", "bm25", {"d42": 3.1415}, ["d42"], cutoff=10)
    path = tmp_path / "run.trec"
    with open(path, "w") as fh:
        write_trec_run(fh, ranked, tag="cfir")
    line = path.read_text().strip()
    qid, q0, doc_id, pos, score, tag = line.split(" ")
    assert (qid, q0, doc_id, pos, tag) == ("q7", "Q0", "d42", "1", "cfir")
    assert float(score) == pytest.approx(3.1415)
