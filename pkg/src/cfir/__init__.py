"""Counterfactual term suggestions for retrieval rankings: given a query, a
retrieval model, and a document outside the top-K, find which added words
would push the document up the ranking, and measure how often that works."""

__version__ = "0.1.0"

from .cf_engine import CfConfig, CounterfactualResult, generate
from .corpus import Document, InvertedIndex, Query, build_index, load_corpus, load_queries, tokenize
from .importance import ImportanceStrategy, Vocabulary, build_vocabulary, important_words
from .retrieval import Bm25Scorer, EmbeddingScorer, RankedList, bm25_score, rank, rank_of

__all__ = [
    "CfConfig",
    "CounterfactualResult",
    "generate",
    "Document",
    "InvertedIndex",
    "Query",
    "build_index",
    "load_corpus",
    "load_queries",
    "tokenize",
    "ImportanceStrategy",
    "Vocabulary",
    "build_vocabulary",
    "important_words",
    "Bm25Scorer",
    "EmbeddingScorer",
    "RankedList",
    "bm25_score",
    "rank",
    "rank_of",
]
