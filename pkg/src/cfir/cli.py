"""Command-line surface: index / search / explain / evaluate / sweep.

Every command exits 0 on success and nonzero on error; per-pair pipeline
failures inside a batch do not abort it (they are counted in the report and
the command still exits 0). Each run writes a resolved config snapshot,
seeds, and format versions into the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import classifier, corpus, evaluation, retrieval
from .bridge_client import BridgeClient, ExternalScorer
from .config import RunConfig, resolve_config
from .corpus import INDEX_FORMAT_VERSION, build_index, load_corpus, load_queries
from .evaluation import REPORT_FORMAT_VERSION, TestPair
from .pipeline import PipelineSettings, Resources
from .retrieval import Bm25Scorer, EmbeddingScorer, load_embeddings

INDEX_FILENAME = "index.bin"


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--corpus", help="JSONL corpus path")
    p.add_argument("--queries", help="TSV query file path")
    p.add_argument("--model", choices=["bm25", "embed", "external"])
    p.add_argument("--embeddings", help="embedding table path")
    p.add_argument("--bridge", help="external scorer endpoint (tcp:HOST:PORT or a command)")
    p.add_argument("--topk", type=int, help="top-K threshold (class-1 cut)")
    p.add_argument("--nwords", type=int, help="important words kept per document")
    p.add_argument("--strategy", choices=["tfidf", "embed_sim", "keybert"])
    p.add_argument("--classifier", choices=["lr", "rf"])
    p.add_argument("--cf-k", type=int, dest="cf_k", help="simultaneous counterfactuals")
    p.add_argument("--lambda1", type=float, help="proximity weight")
    p.add_argument("--lambda2", type=float, help="diversity weight")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--step", type=float, help="gradient descent step size")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="parallel worker count")
    p.add_argument("--out", help="output directory")


_CONFIG_FIELDS = [
    "corpus", "queries", "model", "embeddings", "bridge", "topk", "nwords",
    "strategy", "classifier", "cf_k", "lambda1", "lambda2", "max_iter",
    "step", "seed", "jobs", "out",
]


def _config_from_args(args) -> RunConfig:
    flags = {name: getattr(args, name, None) for name in _CONFIG_FIELDS}
    return resolve_config(args.config, flags)


def _settings(cfg: RunConfig) -> PipelineSettings:
    return PipelineSettings(
        k_top=cfg.topk,
        n_words=cfg.nwords,
        strategy=cfg.strategy,
        classifier_kind=cfg.classifier,
        cf_k=cfg.cf_k,
        lambda1=cfg.lambda1,
        lambda2=cfg.lambda2,
        max_iter=cfg.max_iter,
        step=cfg.step,
    )


def _fail(messages: list[str]) -> int:
    for msg in messages:
        print(f"error: {msg}", file=sys.stderr)
    return 1


def _ensure_out(cfg: RunConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _write_run_meta(cfg: RunConfig, command: str) -> None:
    meta = {
        "command": command,
        "config": cfg.snapshot(),
        "seed": cfg.seed,
        "format_versions": {
            "index": INDEX_FORMAT_VERSION,
            "report": REPORT_FORMAT_VERSION,
            "model": classifier.MODEL_FORMAT_VERSION,
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(os.path.join(cfg.out, "run_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def _load_docs_and_index(cfg: RunConfig):
    """Reuse a persisted index from the output directory when present;
    otherwise ingest the corpus (and leave re-indexing to `cfir index`)."""
    index_path = os.path.join(cfg.out, INDEX_FILENAME)
    if os.path.exists(index_path):
        return corpus.load_index(index_path)
    docs = load_corpus(cfg.corpus)
    return docs, build_index(docs)


def _build_resources(cfg: RunConfig):
    docs, index = _load_docs_and_index(cfg)
    table = load_embeddings(cfg.embeddings) if cfg.embeddings else None
    client = None
    if cfg.model == "bm25":
        scorer = Bm25Scorer(index)
    elif cfg.model == "embed":
        scorer = EmbeddingScorer(table, docs)
    else:
        client = BridgeClient(cfg.bridge)
        scorer = ExternalScorer(client, docs)
    res = Resources(docs, index, scorer, table=table)
    return res, client


def cmd_index(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    docs = load_corpus(cfg.corpus)
    index = build_index(docs)
    path = os.path.join(out, INDEX_FILENAME)
    corpus.save_index(path, docs, index)
    _write_run_meta(cfg, "index")
    print(f"indexed {index.corpus_size} documents -> {path}")
    return 0


def cmd_search(cfg: RunConfig, cutoff: int, tag: str) -> int:
    out = _ensure_out(cfg)
    res, client = _build_resources(cfg)
    try:
        queries = load_queries(cfg.queries)
        run_path = os.path.join(out, "run.trec")
        with open(run_path, "w", encoding="utf-8") as fh:
            for query in queries:
                ranked = res.ranked(query, cutoff)
                retrieval.write_trec_run(fh, ranked, tag=tag)
        _write_run_meta(cfg, "search")
        print(f"wrote {run_path}")
        return 0
    finally:
        if client is not None:
            client.close()


def cmd_explain(cfg: RunConfig, query_id: str, doc_id: str, dump_model: bool) -> int:
    from . import pipeline as pipeline_mod

    out = _ensure_out(cfg)
    res, client = _build_resources(cfg)
    try:
        queries = {q.query_id: q for q in load_queries(cfg.queries)}
        query = queries.get(query_id)
        if query is None:
            return _fail([f"unknown query_id: {query_id!r}"])
        if doc_id not in res.docs_by_id:
            return _fail([f"unknown doc_id: {doc_id!r}"])

        orig_rank = res.original_rank(query, doc_id)
        report_path = os.path.join(out, f"explain_{query_id}_{doc_id}.json")
        if orig_rank <= cfg.topk:
            report = {
                "query_id": query_id,
                "doc_id": doc_id,
                "original_rank": orig_rank,
                "note": f"already within top-{cfg.topk}",
            }
        else:
            outcome = pipeline_mod.run_pair(res, _settings(cfg), query, doc_id, cfg.seed)
            result = outcome.result
            report = {
                "query_id": query_id,
                "doc_id": doc_id,
                "model": res.scorer.name,
                "original_rank": outcome.original_rank,
                "new_rank": outcome.new_rank,
                "improved": outcome.new_rank < outcome.original_rank,
                "vocab_size": len(outcome.vocab),
                "explanation": {w: result.explanation[w] for w in sorted(result.explanation)},
                "cf_success": result.success,
                "add_only_found": result.add_only_found,
                "flipped": result.flipped,
                "attempts": result.attempts,
                "seed": cfg.seed,
                "loss_trace": [float(v) for v in result.loss_trace],
                "chosen": None if result.chosen is None else {
                    outcome.vocab.words[j]: int(v)
                    for j, v in enumerate(result.chosen) if v > 0
                },
                "d_vec": {
                    outcome.vocab.words[j]: int(v)
                    for j, v in enumerate(outcome.d_vec) if v > 0
                },
            }
            classifier.save_model(os.path.join(out, f"model_{query_id}_{doc_id}.bin"),
                                  outcome.model)
            if dump_model:
                with open(os.path.join(out, f"model_{query_id}_{doc_id}.json"),
                          "w", encoding="utf-8") as fh:
                    json.dump(classifier.model_to_jsonable(outcome.model), fh, indent=2)
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        json.dump(report, sys.stdout, indent=2)
        print()
        _write_run_meta(cfg, "explain")
        return 0
    finally:
        if client is not None:
            client.close()


def _load_pairs_file(path: str, res, queries_by_id) -> list[TestPair]:
    """TSV: query_id<TAB>doc_id. Original ranks are computed on load."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}: line {lineno}: expected query_id<TAB>doc_id")
            qid, doc_id = parts
            if qid not in queries_by_id:
                raise ValueError(f"{path}: line {lineno}: unknown query_id {qid!r}")
            if doc_id not in res.docs_by_id:
                raise ValueError(f"{path}: line {lineno}: unknown doc_id {doc_id!r}")
            rank = res.original_rank(queries_by_id[qid], doc_id)
            pairs.append(TestPair(qid, doc_id, rank))
    return pairs


def cmd_evaluate(cfg: RunConfig, pairs_path: str | None,
                 n_queries: int, docs_per_query: int) -> int:
    out = _ensure_out(cfg)
    res, client = _build_resources(cfg)
    try:
        queries = load_queries(cfg.queries)
        queries_by_id = {q.query_id: q for q in queries}
        pairs = None
        if pairs_path:
            pairs = _load_pairs_file(pairs_path, res, queries_by_id)
        report = evaluation.evaluate_run(
            res, _settings(cfg), queries, cfg.seed, pairs=pairs,
            n_queries=n_queries, docs_per_query=docs_per_query, jobs=cfg.jobs,
        )
        report["config"] = cfg.snapshot()
        report["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        report_path = os.path.join(out, "eval_report.json")
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, separators=(",", ":"))
            fh.write("\n")

        csv_path = os.path.join(out, "eval_summary.csv")
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("method,model,classifier,strategy,k_top,n_words,cf_k,"
                     "pairs,improved,fd,avg_new_words,avg_query_overlap,avg_rank_shift\n")
            for method, agg in report["aggregates"].items():
                overlap = agg["avg_query_overlap"]
                shift = agg["avg_rank_shift"]
                fh.write(
                    f"{method},{cfg.model},{cfg.classifier},{cfg.strategy},"
                    f"{cfg.topk},{cfg.nwords},{cfg.cf_k},{agg['pairs']},"
                    f"{agg['improved']},{agg['fd']:.4f},"
                    f"{agg['avg_new_words']:.4f},"
                    f"{'' if overlap is None else f'{overlap:.4f}'},"
                    f"{'' if shift is None else f'{shift:.4f}'}\n"
                )
        _write_run_meta(cfg, "evaluate")
        for method, agg in report["aggregates"].items():
            print(f"{method}: FD={agg['fd']:.1f}% over {agg['pairs']} pairs, "
                  f"avg new words={agg['avg_new_words']:.2f}")
        if report["failures"]:
            print(f"failed pairs: {report['failures']} (see report)")
        print(f"wrote {report_path}")
        return 0
    finally:
        if client is not None:
            client.close()


def cmd_sweep(cfg: RunConfig, parameter: str, values: list[int],
              n_queries: int, docs_per_query: int) -> int:
    out = _ensure_out(cfg)
    res, client = _build_resources(cfg)
    try:
        queries = load_queries(cfg.queries)
        rows = evaluation.sweep(res, _settings(cfg), queries, cfg.seed,
                                parameter, values,
                                n_queries=n_queries, docs_per_query=docs_per_query)
        csv_path = os.path.join(out, f"sweep_{parameter.replace('-', '_')}.csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            evaluation.write_sweep_csv(fh, rows)
        _write_run_meta(cfg, "sweep")
        print(f"wrote {csv_path}")
        return 0
    finally:
        if client is not None:
            client.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfir",
        description="Counterfactual term suggestions for retrieval rankings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build and persist the inverted index")
    _add_shared_flags(p_index)

    p_search = sub.add_parser("search", help="rank queries and emit a TREC run file")
    _add_shared_flags(p_search)
    p_search.add_argument("--cutoff", type=int, default=100)
    p_search.add_argument("--tag", default="cfir")

    p_explain = sub.add_parser("explain", help="counterfactual explanation for one pair")
    _add_shared_flags(p_explain)
    p_explain.add_argument("--query-id", required=True)
    p_explain.add_argument("--doc-id", required=True)
    p_explain.add_argument("--dump-model", action="store_true")

    p_eval = sub.add_parser("evaluate", help="run CFIR and baselines over a pair set")
    _add_shared_flags(p_eval)
    p_eval.add_argument("--pairs", help="TSV pair file (query_id<TAB>doc_id)")
    p_eval.add_argument("--n-queries", type=int, default=evaluation.N_QUERIES)
    p_eval.add_argument("--docs-per-query", type=int, default=evaluation.DOCS_PER_QUERY)

    p_sweep = sub.add_parser("sweep", help="fidelity across a parameter range")
    _add_shared_flags(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=["topk", "nwords", "cf-k"])
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated integers, e.g. 10,30,50")
    p_sweep.add_argument("--n-queries", type=int, default=evaluation.N_QUERIES)
    p_sweep.add_argument("--docs-per-query", type=int, default=evaluation.DOCS_PER_QUERY)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except (ValueError, OSError) as exc:
        return _fail([str(exc)])

    require_queries = args.command in ("search", "explain", "evaluate", "sweep")
    problems = cfg.validate()
    if require_queries and not cfg.queries:
        problems.append("queries: path is required for this command")
    if problems:
        return _fail(problems)

    try:
        if args.command == "index":
            return cmd_index(cfg)
        if args.command == "search":
            return cmd_search(cfg, args.cutoff, args.tag)
        if args.command == "explain":
            return cmd_explain(cfg, args.query_id, args.doc_id, args.dump_model)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.pairs, args.n_queries, args.docs_per_query)
        if args.command == "sweep":
            values = [int(v) for v in args.values.split(",") if v.strip()]
            if not values:
                return _fail(["--values: expected at least one integer"])
            return cmd_sweep(cfg, args.param, values, args.n_queries, args.docs_per_query)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        return _fail([f"{type(exc).__name__}: {exc}"])
    return 2


if __name__ == "__main__":
    sys.exit(main())
