#!/usr/bin/env python3
"""Generate the bundled desk-scale corpus: a topic-structured synthetic
collection (JSONL), 50 topic queries (TSV), and topic-clustered word
embeddings (text). Fully deterministic for a given seed; run with no
arguments to refresh data/desk/."""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
from cfir.corpus import tokenize  # noqa: E402

SEED = 74251

N_TOPICS = 60
N_QUERIES = 50
TOPIC_WORDS = 28
BACKGROUND_WORDS = 350
DOCS_PER_TOPIC = 48
BACKGROUND_DOCS = 120
DOC_LEN_RANGE = (45, 72)

TOPIC_FRACTION = 0.50
NOISE_FRACTION = 0.12  # tokens borrowed from other topics (spreads query words)
HEAD_DROPOUT = 0.18  # chance a topic doc loses one query head word entirely
QUERY_LENGTHS = (2, 3)  # alternate across queries
TOPIC_ZIPF = 0.7
BG_ZIPF = 0.9

EMBED_DIM = 24
EMBED_NOISE = 0.55

ONSETS = [
    "b", "br", "c", "cl", "cr", "d", "dr", "f", "fl", "fr", "g", "gl", "gr",
    "h", "j", "k", "l", "m", "n", "p", "pl", "pr", "r", "s", "sk", "sl",
    "sm", "sn", "sp", "st", "t", "tr", "v", "w", "z",
]
VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "io", "ou"]
CODAS = ["", "n", "r", "s", "t", "l", "m", "nd", "rn", "st", "ck"]


def make_words(rng, count, taken):
    """Pseudo-English words, 2-3 syllables, unique, tokenizer-stable."""
    words = []
    while len(words) < count:
        syllables = 2 if rng.random() < 0.62 else 3
        parts = []
        for _ in range(syllables):
            parts.append(ONSETS[rng.integers(len(ONSETS))])
            parts.append(VOWELS[rng.integers(len(VOWELS))])
        parts.append(CODAS[rng.integers(len(CODAS))])
        word = "".join(parts)
        if len(word) < 4 or word in taken:
            continue
        if tokenize(word) != [word]:
            continue
        taken.add(word)
        words.append(word)
    return words


def zipf_weights(n, s):
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def make_corpus(rng):
    taken = set()
    topics = [make_words(rng, TOPIC_WORDS, taken) for _ in range(N_TOPICS)]
    background = make_words(rng, BACKGROUND_WORDS, taken)

    topic_w = zipf_weights(TOPIC_WORDS, TOPIC_ZIPF)
    bg_w = zipf_weights(BACKGROUND_WORDS, BG_ZIPF)

    docs = []

    def sample_doc(topic_id):
        length = int(rng.integers(DOC_LEN_RANGE[0], DOC_LEN_RANGE[1] + 1))
        n_topic = int(round(length * TOPIC_FRACTION))
        n_noise = int(round(length * NOISE_FRACTION))
        n_bg = length - n_topic - n_noise

        topic_words = list(topics[topic_id])
        toks = list(rng.choice(topic_words, size=n_topic, p=topic_w))
        if rng.random() < HEAD_DROPOUT:
            # Dropped head tokens turn into background text so the other
            # topic words keep their natural frequencies.
            drop = topic_words[int(rng.integers(min(QUERY_LENGTHS)))]
            toks = [t for t in toks if t != drop]
            n_bg += n_topic - len(toks)
        toks += list(rng.choice(background, size=n_bg, p=bg_w))
        for _ in range(n_noise):
            other = int(rng.integers(N_TOPICS))
            toks.append(topics[other][int(rng.choice(TOPIC_WORDS, p=topic_w))])
        perm = rng.permutation(len(toks))
        return [toks[i] for i in perm]

    doc_id = 0
    for topic_id in range(N_TOPICS):
        for _ in range(DOCS_PER_TOPIC):
            docs.append((f"d{doc_id:05d}", sample_doc(topic_id)))
            doc_id += 1
    for _ in range(BACKGROUND_DOCS):
        toks = list(rng.choice(background, size=int(rng.integers(*DOC_LEN_RANGE)), p=bg_w))
        docs.append((f"d{doc_id:05d}", toks))
        doc_id += 1

    queries = []
    for qi in range(N_QUERIES):
        n_terms = QUERY_LENGTHS[qi % len(QUERY_LENGTHS)]
        queries.append((f"q{qi:03d}", topics[qi][:n_terms]))

    return topics, background, docs, queries


def make_embeddings(rng, topics, background):
    vectors = {}
    for topic_words in topics:
        direction = rng.normal(size=EMBED_DIM)
        direction /= np.linalg.norm(direction)
        for word in topic_words:
            vec = direction + EMBED_NOISE * rng.normal(size=EMBED_DIM)
            vectors[word] = vec / np.linalg.norm(vec)
    for word in background:
        vec = rng.normal(size=EMBED_DIM)
        vectors[word] = vec / np.linalg.norm(vec)
    return vectors


def write_outputs(out_dir, docs, queries, vectors):
    os.makedirs(out_dir, exist_ok=True)
    corpus_path = os.path.join(out_dir, "corpus.jsonl")
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for doc_id, toks in docs:
            text = " ".join(toks).replace('"', "")
            fh.write('{"id": "%s", "text": "%s"}\n' % (doc_id, text))
    queries_path = os.path.join(out_dir, "queries.tsv")
    with open(queries_path, "w", encoding="utf-8") as fh:
        for qid, terms in queries:
            fh.write(f"{qid}\t{' '.join(terms)}\n")
    embed_path = os.path.join(out_dir, "embeddings.txt")
    with open(embed_path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vectors)} {EMBED_DIM}\n")
        for word in sorted(vectors):
            coords = " ".join(f"{v:.5f}" for v in vectors[word])
            fh.write(f"{word} {coords}\n")
    return corpus_path, queries_path, embed_path


def generate(out_dir, seed=SEED):
    rng = np.random.default_rng(seed)
    topics, background, docs, queries = make_corpus(rng)
    vectors = make_embeddings(rng, topics, background)
    return write_outputs(out_dir, docs, queries, vectors)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    default_out = os.path.join(os.path.dirname(__file__), "..", "data", "desk")
    parser.add_argument("--out", default=os.path.normpath(default_out))
    parser.add_argument("--seed", type=int, default=SEED)
    args = parser.parse_args()
    paths = generate(args.out, args.seed)
    for p in paths:
        print(p)


if __name__ == "__main__":
    main()
