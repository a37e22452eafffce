import os
import subprocess
import sys

import pytest

ROOT = os.path.normpath(os.path.join(os.path.dirname(__file__), ".."))
DESK_DIR = os.path.join(ROOT, "data", "desk")
DESK_CORPUS = os.path.join(DESK_DIR, "corpus.jsonl")
DESK_QUERIES = os.path.join(DESK_DIR, "queries.tsv")
DESK_EMBEDDINGS = os.path.join(DESK_DIR, "embeddings.txt")

sys.path.insert(0, os.path.join(ROOT, "src"))


@pytest.fixture(scope="session")
def desk_paths():
    """Bundled desk corpus; regenerated deterministically if missing."""
    if not (os.path.exists(DESK_CORPUS) and os.path.exists(DESK_QUERIES)
            and os.path.exists(DESK_EMBEDDINGS)):
        subprocess.run(
            [sys.executable, os.path.join(ROOT, "scripts", "make_desk_corpus.py")],
            check=True,
        )
    return {"corpus": DESK_CORPUS, "queries": DESK_QUERIES,
            "embeddings": DESK_EMBEDDINGS}


@pytest.fixture(scope="session")
def desk_resources(desk_paths):
    from cfir.corpus import build_index, load_corpus, load_queries
    from cfir.pipeline import Resources
    from cfir.retrieval import Bm25Scorer

    docs = load_corpus(desk_paths["corpus"])
    queries = load_queries(desk_paths["queries"])
    index = build_index(docs)
    res = Resources(docs, index, Bm25Scorer(index))
    return res, queries


@pytest.fixture()
def tiny_corpus():
    """Six hand-written documents over a small vocabulary."""
    from cfir.corpus import Document, build_index

    texts = {
        "d1": "prohibition law repealed prohibition amendment",
        "d2": "prohibition law temperance movement riot",
        "d3": "lipid membrane cell storage lipid lipid",
        "d4": "membrane proteins percent role biochemical",
        "d5": "wave oscillations medium speed wave transverse",
        "d6": "law justice court ruling appeal law",
    }
    docs = [Document.from_text(doc_id, text) for doc_id, text in texts.items()]
    return docs, build_index(docs)
