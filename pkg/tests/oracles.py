"""Shared independent oracles for the test suite. Everything here recomputes
statistics from raw token lists with its own arithmetic; nothing may call the
package's scoring paths."""

import math

from cfir.retrieval import BM25_B, BM25_K1


class BruteForceBm25:
    """Per-corpus oracle with precomputed document token sets (the scoring
    arithmetic itself is written out longhand)."""

    def __init__(self, docs):
        self.docs = list(docs)
        self.by_id = {d.doc_id: d for d in self.docs}
        self.n = len(self.docs)
        self.avg_len = sum(d.length for d in self.docs) / self.n
        self._token_sets = {d.doc_id: set(d.tokens) for d in self.docs}
        self._df_cache = {}

    def df(self, token):
        if token not in self._df_cache:
            self._df_cache[token] = sum(
                1 for d in self.docs if token in self._token_sets[d.doc_id]
            )
        return self._df_cache[token]

    def score(self, query_tokens, doc_id):
        target = self.by_id[doc_id]
        total = 0.0
        for token in query_tokens:
            tf = target.tokens.count(token)
            if tf == 0:
                continue
            df = self.df(token)
            idf = math.log((self.n - df + 0.5) / (df + 0.5) + 1.0)
            norm = tf + BM25_K1 * (
                1.0 - BM25_B + BM25_B * target.length / self.avg_len
            )
            total += idf * tf * (BM25_K1 + 1.0) / norm
        return total
