#!/usr/bin/env python3
"""Independently re-derive every aggregate in an evaluation report from its
per-pair records, and replay each improved pair's modified rank from the
stored explanation. Exits nonzero on any mismatch.

The aggregate arithmetic below is deliberately written from scratch (plain
sums over the record list) rather than calling the package's aggregation
helpers, so the report cannot agree with itself by construction.
"""

import argparse
import json
import os
import sys
from collections import Counter

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cfir import cli  # noqa: E402
from cfir.cf_engine import apply_explanation  # noqa: E402
from cfir.config import RunConfig  # noqa: E402
from cfir.corpus import load_queries  # noqa: E402


def recompute_aggregates(records):
    improved = 0
    new_word_sum = 0
    overlap_vals = []
    shifts = []
    sims = []
    for rec in records:
        if rec["improved"]:
            improved += 1
            shifts.append(rec["old_rank"] - rec["new_rank"])
        new_word_sum += rec["new_word_types"]
        if rec["query_overlap_pct"] is not None:
            overlap_vals.append(rec["query_overlap_pct"])
        if rec.get("similarity") is not None:
            sims.append(rec["similarity"])
    n = len(records)
    return {
        "pairs": n,
        "improved": improved,
        "fd": 100.0 * improved / n,
        "avg_new_words": new_word_sum / n,
        "avg_query_overlap": sum(overlap_vals) / len(overlap_vals) if overlap_vals else None,
        "avg_rank_shift": sum(shifts) / len(shifts) if shifts else None,
        "avg_similarity": sum(sims) / len(sims) if sims else None,
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--report", required=True, help="eval_report.json path")
    parser.add_argument("--skip-replay", action="store_true",
                        help="only recheck the aggregate arithmetic")
    args = parser.parse_args()

    with open(args.report, encoding="utf-8") as fh:
        report = json.load(fh)

    problems = []
    records = report["records"]
    methods = sorted({r["method"] for r in records})
    for method in methods:
        recs = [r for r in records if r["method"] == method]
        expected = recompute_aggregates(recs)
        stored = report["aggregates"].get(method)
        if stored is None:
            problems.append(f"{method}: aggregates missing from report")
            continue
        for key, value in expected.items():
            if stored.get(key) != value:
                problems.append(
                    f"{method}.{key}: report says {stored.get(key)!r}, records give {value!r}"
                )
        print(f"{method}: recomputed FD={expected['fd']:.4f}% "
              f"({expected['improved']}/{expected['pairs']})")

    if not args.skip_replay:
        cfg = RunConfig(**report["config"])
        res, client = cli._build_resources(cfg)
        try:
            queries = {q.query_id: q for q in load_queries(cfg.queries)}
            replayed = 0
            for rec in records:
                if not rec["improved"]:
                    continue
                doc = res.docs_by_id[rec["doc_id"]]
                modified = apply_explanation(doc, Counter(rec["explanation"]))
                new_rank, _ = res.modified_rank(queries[rec["query_id"]], modified)
                if new_rank != rec["new_rank"]:
                    problems.append(
                        f"{rec['method']} {rec['query_id']}/{rec['doc_id']}: stored "
                        f"new_rank {rec['new_rank']}, replay gives {new_rank}"
                    )
                elif new_rank >= rec["old_rank"]:
                    problems.append(
                        f"{rec['method']} {rec['query_id']}/{rec['doc_id']}: marked "
                        f"improved but {new_rank} >= {rec['old_rank']}"
                    )
                replayed += 1
            print(f"replayed {replayed} improved pairs")
        finally:
            if client is not None:
                client.close()

    if problems:
        for p in problems:
            print(f"MISMATCH: {p}", file=sys.stderr)
        return 1
    print("report verified: aggregates and replays consistent")
    return 0


if __name__ == "__main__":
    sys.exit(main())
