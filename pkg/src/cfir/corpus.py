"""Corpus ingestion: deterministic tokenization, JSONL/TSV loaders, and an
immutable inverted index carrying the statistics every scorer needs."""

from __future__ import annotations

import json
import pickle
import re
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass

INDEX_FORMAT_VERSION = 1
_INDEX_MAGIC = b"CFIRIDX\n"
_PICKLE_PROTOCOL = 4

# Fixed English stopword list, shipped in-repo so tokenization never depends
# on an external resource.
STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are aren as at be
    because been before being below between both but by can cannot could
    couldn did didn do does doesn doing don down during each few for from
    further had hadn has hasn have haven having he her here hers herself him
    himself his how i if in into is isn it its itself just ll m ma me mightn
    more most mustn my myself needn no nor not now o of off on once only or
    other our ours ourselves out over own re s same shan she should shouldn
    so some such t than that the their theirs them themselves then there
    these they this those through to too under until up ve very was wasn we
    were weren what when where which while who whom why will with won would
    wouldn y you your yours yourself yourselves
    """.split()
)

# Alphanumeric runs; underscore is a separator like any other punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_MIN_TOKEN_LEN = 2


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop tokens shorter than
    two characters and stopwords. Deterministic; empty input gives []."""
    return [
        tok
        for tok in _TOKEN_RE.findall(text.lower())
        if len(tok) >= _MIN_TOKEN_LEN and tok not in STOPWORDS
    ]


@dataclass(frozen=True)
class Document:
    doc_id: str
    raw_text: str
    tokens: tuple[str, ...]
    length: int

    @classmethod
    def from_text(cls, doc_id: str, raw_text: str) -> "Document":
        toks = tuple(tokenize(raw_text))
        return cls(doc_id=doc_id, raw_text=raw_text, tokens=toks, length=len(toks))

    def counts(self) -> Counter:
        return Counter(self.tokens)


@dataclass(frozen=True)
class Query:
    query_id: str
    raw_text: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, query_id: str, raw_text: str) -> "Query":
        return cls(query_id=query_id, raw_text=raw_text, tokens=tuple(tokenize(raw_text)))


@dataclass(frozen=True)
class InvertedIndex:
    """Read-only after build; safe to share across workers.

    postings[t] is sorted by doc_id, so per-document term frequencies are
    available by binary search without a second map.
    """

    postings: dict[str, tuple[tuple[str, int], ...]]
    doc_freq: dict[str, int]
    doc_length: dict[str, int]
    avg_doc_length: float
    corpus_size: int

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self.doc_length

    def tf(self, token: str, doc_id: str) -> int:
        plist = self.postings.get(token)
        if not plist:
            return 0
        i = bisect_left(plist, doc_id, key=lambda e: e[0])
        if i < len(plist) and plist[i][0] == doc_id:
            return plist[i][1]
        return 0


def build_index(docs: list[Document]) -> InvertedIndex:
    """Build the inverted index. Rejects duplicate doc_ids."""
    seen: set[str] = set()
    raw_postings: dict[str, list[tuple[str, int]]] = {}
    doc_length: dict[str, int] = {}
    total_len = 0
    for doc in docs:
        if doc.doc_id in seen:
            raise ValueError(f"duplicate doc_id: {doc.doc_id!r}")
        seen.add(doc.doc_id)
        doc_length[doc.doc_id] = doc.length
        total_len += doc.length
        for token, tf in sorted(doc.counts().items()):
            raw_postings.setdefault(token, []).append((doc.doc_id, tf))

    postings = {
        token: tuple(sorted(entries))
        for token, entries in sorted(raw_postings.items())
    }
    doc_freq = {token: len(entries) for token, entries in postings.items()}
    n = len(docs)
    return InvertedIndex(
        postings=postings,
        doc_freq=doc_freq,
        doc_length=doc_length,
        avg_doc_length=(total_len / n) if n else 0.0,
        corpus_size=n,
    )


def load_corpus(path: str) -> list[Document]:
    """Read a JSON-lines corpus: one object per line with string keys
    `id` and `text`. Blank lines are skipped; anything else malformed is an
    error naming the line."""
    docs: list[Document] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}: line {lineno}: expected a JSON object")
            for key in ("id", "text"):
                if key not in obj:
                    raise ValueError(f"{path}: line {lineno}: missing key {key!r}")
                if not isinstance(obj[key], str):
                    raise ValueError(f"{path}: line {lineno}: key {key!r} must be a string")
            docs.append(Document.from_text(obj["id"], obj["text"]))
    return docs


def load_queries(path: str) -> list[Query]:
    """Read a TSV query file: `query_id<TAB>query_text`, UTF-8, one query per
    line. A query whose text tokenizes to nothing is rejected."""
    queries: list[Query] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}: line {lineno}: expected query_id<TAB>query_text")
            qid, text = line.split("\t", 1)
            if not qid:
                raise ValueError(f"{path}: line {lineno}: empty query_id")
            query = Query.from_text(qid, text)
            if not query.tokens:
                raise ValueError(
                    f"{path}: line {lineno}: query {qid!r} has no usable tokens"
                )
            queries.append(query)
    return queries


def save_index(path: str, docs: list[Document], index: InvertedIndex) -> None:
    """Persist documents plus index as a versioned binary file. The payload
    layout is fixed, so rebuilding from identical inputs is byte-identical."""
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "docs": [(d.doc_id, d.raw_text, list(d.tokens)) for d in docs],
        "postings": {t: list(p) for t, p in index.postings.items()},
        "doc_length": dict(index.doc_length),
        "avg_doc_length": index.avg_doc_length,
        "corpus_size": index.corpus_size,
    }
    with open(path, "wb") as fh:
        fh.write(_INDEX_MAGIC)
        fh.write(pickle.dumps(payload, protocol=_PICKLE_PROTOCOL))


def load_index(path: str) -> tuple[list[Document], InvertedIndex]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_INDEX_MAGIC))
        if magic != _INDEX_MAGIC:
            raise ValueError(f"{path}: not an index file (bad magic)")
        payload = pickle.loads(fh.read())
    version = payload.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported index format version {version!r} "
            f"(expected {INDEX_FORMAT_VERSION})"
        )
    docs = [
        Document(doc_id=i, raw_text=t, tokens=tuple(toks), length=len(toks))
        for i, t, toks in payload["docs"]
    ]
    postings = {t: tuple(tuple(e) for e in p) for t, p in payload["postings"].items()}
    index = InvertedIndex(
        postings=postings,
        doc_freq={t: len(p) for t, p in postings.items()},
        doc_length=payload["doc_length"],
        avg_doc_length=payload["avg_doc_length"],
        corpus_size=payload["corpus_size"],
    )
    return docs, index
