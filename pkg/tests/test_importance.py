import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfir.corpus import Document, Query, build_index
from cfir.importance import ImportanceStrategy, build_vocabulary, important_words
from cfir.retrieval import EmbeddingTable


def test_strategy_validation():
    with pytest.raises(ValueError, match="strategy"):
        ImportanceStrategy(kind="mystery")
    with pytest.raises(ValueError, match="n must"):
        ImportanceStrategy(n=0)


def test_short_document_returns_all_distinct_tokens(tiny_corpus):
    docs, index = tiny_corpus
    strategy = ImportanceStrategy(kind="tfidf", n=10)
    doc = next(d for d in docs if d.doc_id == "d4")  # 5 distinct tokens
    words = important_words(doc, Query.from_text("q", "role"), strategy, index)
    assert sorted(words) == sorted(set(doc.tokens))


def test_tfidf_prefers_rare_tokens_at_equal_tf():
    docs = [
        Document.from_text("d1", "unique shared filler"),
        Document.from_text("d2", "shared other filler"),
        Document.from_text("d3", "shared next filler"),
    ]
    index = build_index(docs)
    strategy = ImportanceStrategy(kind="tfidf", n=2)
    words = important_words(docs[0], Query.from_text("q", "shared"), strategy, index)
    # tf equal (1 each): unique has df=1 -> w = ln(3); shared df=3 -> w = 0.
    assert words[0] == "unique"
    assert index.doc_freq["shared"] == 3


def test_empty_document_rejected(tiny_corpus):
    _, index = tiny_corpus
    empty = Document("dx", "", (), 0)
    with pytest.raises(ValueError, match="empty"):
        important_words(empty, Query.from_text("q", "law"), ImportanceStrategy(), index)


def test_embed_sim_ranks_query_matching_token_first(tiny_corpus):
    docs, index = tiny_corpus
    e = np.eye(4)
    table = EmbeddingTable(dim=4, vectors={
        "law": e[0], "prohibition": e[1], "temperance": e[2],
        "movement": e[3], "riot": -e[0],
    })
    strategy = ImportanceStrategy(kind="embed_sim", n=1)
    doc = next(d for d in docs if d.doc_id == "d2")
    words = important_words(doc, Query.from_text("q", "law"), strategy, index, table)
    assert words == ["law"]


def test_embed_sim_without_table_is_configuration_error(tiny_corpus):
    docs, index = tiny_corpus
    strategy = ImportanceStrategy(kind="embed_sim", n=3)
    with pytest.raises(ValueError, match="embedding table"):
        important_words(docs[0], Query.from_text("q", "law"), strategy, index)


def test_keybert_slot_is_unimplemented(tiny_corpus):
    docs, index = tiny_corpus
    with pytest.raises(NotImplementedError):
        important_words(docs[0], Query.from_text("q", "law"),
                        ImportanceStrategy(kind="keybert"), index)


def test_vocabulary_is_union_of_top_sets():
    docs = [
        Document.from_text("d1", "alpha beta"),
        Document.from_text("d2", "beta gamma"),
    ]
    index = build_index(docs)
    vocab = build_vocabulary(docs, Query.from_text("q", "alpha"),
                             ImportanceStrategy(n=10), index)
    assert sorted(vocab.words) == ["alpha", "beta", "gamma"]
    assert len(vocab) == 3
    assert all(vocab.words[vocab.position[w]] == w for w in vocab.words)


def test_vocabulary_requires_documents(tiny_corpus):
    _, index = tiny_corpus
    with pytest.raises(ValueError, match="at least one"):
        build_vocabulary([], Query.from_text("q", "law"), ImportanceStrategy(), index)


@given(st.integers(min_value=1, max_value=5), st.integers(min_value=1, max_value=6),
       st.integers(min_value=0, max_value=10_000))
def test_vocabulary_union_bound_and_membership(k_top, n, seed):
    rng = np.random.default_rng(seed)
    vocab_pool = ["law", "riot", "cell", "wave", "court", "lipid", "speed",
                  "appeal", "storage", "ruling"]
    docs = []
    for i in range(k_top):
        length = int(rng.integers(1, 12))
        toks = [vocab_pool[int(j)] for j in rng.integers(0, len(vocab_pool), size=length)]
        docs.append(Document(f"d{i}", " ".join(toks), tuple(toks), length))
    index = build_index(docs)
    strategy = ImportanceStrategy(kind="tfidf", n=n)
    query = Query.from_text("q", "law")
    vocab = build_vocabulary(docs, query, strategy, index)

    assert len(vocab) <= k_top * n
    assert len(set(vocab.words)) == len(vocab.words)
    per_doc_tops = [set(important_words(d, query, strategy, index)) for d in docs]
    assert set(vocab.words) == set().union(*per_doc_tops)
    for doc, top in zip(docs, per_doc_tops):
        assert top <= set(doc.tokens)


def test_vocabulary_order_is_deterministic_and_importance_sorted():
    docs = [
        Document.from_text("d1", "alpha alpha alpha beta"),
        Document.from_text("d2", "beta gamma delta delta"),
        Document.from_text("d3", "filler filler filler filler"),
    ]
    index = build_index(docs)
    query = Query.from_text("q", "alpha")
    vocab1 = build_vocabulary(docs[:2], query, ImportanceStrategy(n=10), index)
    vocab2 = build_vocabulary(docs[:2], query, ImportanceStrategy(n=10), index)
    assert vocab1.words == vocab2.words
    weight = {w: 0.0 for w in vocab1.words}
    for doc in docs[:2]:
        n_docs = index.corpus_size
        for token, tf in doc.counts().items():
            if token in weight:
                weight[token] += tf * math.log(n_docs / index.doc_freq[token])
    expected = sorted(weight, key=lambda w: (-weight[w], w))
    assert list(vocab1.words) == expected
