"""Scoring server for the cfir external-model protocol.

One JSON object per line, UTF-8. The server speaks first:

    {"op": "hello", "proto": 1, "name": "<scorer>"}

then answers each request `{"id", "query", "docs": [{"doc_id", "text"}]}`
with `{"id", "scores": [...]}` (one finite float per doc, aligned). Bad
input never kills the loop: the reply is `{"id": ..., "error": "..."}` with
the request id when one could be parsed, else null.

Transports: stdio (default) or a single-connection-at-a-time TCP listener
(`--port`). `--fake` serves a deterministic token-overlap scorer so the
protocol can be exercised without any model download.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys

PROTO_VERSION = 1


class FakeOverlapScorer:
    """Saturating token-overlap ratio: each distinct query token contributes
    tf/(1+tf) of its count in the document, averaged over the query. Unlike a
    set Jaccard this responds to repeated terms, which the counterfactual
    pipeline needs a stand-in model to do."""

    name = "fake-overlap"

    def score(self, query: str, texts: list[str]) -> list[float]:
        q = sorted(set(query.lower().split()))
        out = []
        for text in texts:
            if not q:
                out.append(0.0)
                continue
            counts: dict[str, int] = {}
            for tok in text.lower().split():
                counts[tok] = counts.get(tok, 0) + 1
            covered = sum(counts.get(t, 0) / (1.0 + counts.get(t, 0)) for t in q)
            out.append(covered / len(q))
        return out


class CrossEncoderScorer:
    """sentence-transformers cross-encoder; loaded lazily so the fake path
    never imports torch."""

    def __init__(self, model_name: str):
        from sentence_transformers import CrossEncoder

        self.name = model_name
        self._model = CrossEncoder(model_name)

    def score(self, query: str, texts: list[str]) -> list[float]:
        preds = self._model.predict([(query, t) for t in texts])
        return [float(p) for p in preds]


def _error_line(req_id, message: str) -> str:
    return json.dumps({"id": req_id, "error": message})


def handle_line(scorer, line: str) -> str:
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return _error_line(None, f"malformed JSON: {exc.msg}")
    if not isinstance(request, dict):
        return _error_line(None, "request must be an object")
    req_id = request.get("id")
    if not isinstance(req_id, int):
        return _error_line(None, "missing integer 'id'")
    query = request.get("query")
    docs = request.get("docs")
    if not isinstance(query, str) or not isinstance(docs, list):
        return _error_line(req_id, "request needs string 'query' and list 'docs'")
    texts = []
    for doc in docs:
        if not isinstance(doc, dict) or not isinstance(doc.get("text"), str):
            return _error_line(req_id, "each doc needs a string 'text'")
        texts.append(doc["text"])
    try:
        scores = scorer.score(query, texts)
    except Exception as exc:  # noqa: BLE001 - the loop must outlive the model
        return _error_line(req_id, f"scorer failure: {exc}")
    if len(scores) != len(texts) or not all(
        isinstance(s, float) and s == s and abs(s) != float("inf") for s in scores
    ):
        return _error_line(req_id, "scorer returned misaligned or non-finite scores")
    return json.dumps({"id": req_id, "scores": scores})


def serve_stream(scorer, reader, writer) -> None:
    writer.write(json.dumps({"op": "hello", "proto": PROTO_VERSION,
                             "name": scorer.name}) + "\n")
    writer.flush()
    for raw in reader:
        line = raw.strip()
        if not line:
            continue
        writer.write(handle_line(scorer, line) + "\n")
        writer.flush()


def serve_tcp(scorer, port: int) -> None:
    listener = socket.create_server(("127.0.0.1", port))
    bound = listener.getsockname()[1]
    print(f"listening on {bound}", file=sys.stderr, flush=True)
    try:
        while True:
            conn, _ = listener.accept()
            with conn:
                reader = conn.makefile("r", encoding="utf-8", newline="\n")
                writer = conn.makefile("w", encoding="utf-8", newline="\n")
                try:
                    serve_stream(scorer, reader, writer)
                except (BrokenPipeError, ConnectionResetError):
                    pass
    finally:
        listener.close()


def build_scorer(args):
    if args.fake:
        return FakeOverlapScorer()
    if args.model:
        return CrossEncoderScorer(args.model)
    raise SystemExit("either --fake or --model NAME is required")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cfir-bridge", description=__doc__)
    parser.add_argument("--fake", action="store_true",
                        help="serve the deterministic token-overlap scorer")
    parser.add_argument("--model", help="sentence-transformers cross-encoder name")
    parser.add_argument("--port", type=int,
                        help="serve over TCP on this port (0 picks a free one); "
                             "default is stdio")
    args = parser.parse_args(argv)
    scorer = build_scorer(args)
    if args.port is not None:
        serve_tcp(scorer, args.port)
    else:
        serve_stream(scorer, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
