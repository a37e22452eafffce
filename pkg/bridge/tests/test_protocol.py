"""Protocol conformance for the scoring server: handshake, id echo, score
alignment, malformed-line recovery, determinism, TCP transport."""

import json
import os
import re
import socket
import subprocess
import sys

import pytest

BRIDGE_SRC = os.path.normpath(os.path.join(os.path.dirname(__file__), "..", "src"))
sys.path.insert(0, BRIDGE_SRC)

from cfir_bridge.server import FakeOverlapScorer, handle_line  # noqa: E402


def spawn_stdio():
    env = dict(os.environ)
    env["PYTHONPATH"] = BRIDGE_SRC + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.Popen(
        [sys.executable, "-m", "cfir_bridge", "--fake"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, env=env,
    )


@pytest.fixture()
def server():
    proc = spawn_stdio()
    hello = json.loads(proc.stdout.readline())
    yield proc, hello
    proc.stdin.close()
    proc.wait(timeout=10)


def ask(proc, obj):
    proc.stdin.write(json.dumps(obj) + "\n")
    proc.stdin.flush()
    return json.loads(proc.stdout.readline())


def test_handshake_pins_protocol(server):
    _, hello = server
    assert hello == {"op": "hello", "proto": 1, "name": "fake-overlap"}


def test_response_aligns_scores_and_echoes_id(server):
    proc, _ = server
    response = ask(proc, {"id": 7, "query": "law riot", "docs": [
        {"doc_id": "a", "text": "stone law"},
        {"doc_id": "b", "text": "law riot"},
    ]})
    assert response["id"] == 7
    assert len(response["scores"]) == 2
    assert response["scores"][1] > response["scores"][0]


def test_duplicate_doc_texts_get_equal_scores(server):
    proc, _ = server
    response = ask(proc, {"id": 1, "query": "law riot", "docs": [
        {"doc_id": "a", "text": "law court"},
        {"doc_id": "b", "text": "law court"},
    ]})
    assert response["scores"][0] == response["scores"][1]


def test_malformed_line_recovers(server):
    proc, _ = server
    proc.stdin.write("{not json]\n")
    proc.stdin.flush()
    err = json.loads(proc.stdout.readline())
    assert err["id"] is None and "error" in err
    response = ask(proc, {"id": 2, "query": "law", "docs": [{"doc_id": "a", "text": "law"}]})
    assert response["id"] == 2 and "scores" in response


def test_bad_request_shape_reports_error_with_id(server):
    proc, _ = server
    err = ask(proc, {"id": 9, "query": "law", "docs": [{"doc_id": "a"}]})
    assert err["id"] == 9 and "error" in err
    err = ask(proc, {"query": "law", "docs": []})
    assert err["id"] is None and "error" in err


def test_every_response_id_appeared_in_exactly_one_request(server):
    proc, _ = server
    seen = []
    for req_id in (3, 5, 8):
        response = ask(proc, {"id": req_id, "query": "law",
                              "docs": [{"doc_id": "x", "text": "law"}]})
        seen.append(response["id"])
    assert seen == [3, 5, 8]


def test_scorer_failure_keeps_loop_alive():
    class Exploding:
        name = "boom"

        def score(self, query, texts):
            raise RuntimeError("kaput")

    line = json.dumps({"id": 4, "query": "law", "docs": [{"doc_id": "a", "text": "x"}]})
    reply = json.loads(handle_line(Exploding(), line))
    assert reply["id"] == 4 and "kaput" in reply["error"]
    ok = json.loads(handle_line(FakeOverlapScorer(), line))
    assert ok["scores"] == [0.0]


def test_fake_scorer_overlap_values():
    scorer = FakeOverlapScorer()
    assert scorer.score("law riot", ["law riot"]) == [0.5]
    assert scorer.score("law riot", ["stone"]) == [0.0]
    assert scorer.score("law riot", ["law stone"]) == [pytest.approx(0.25)]
    assert scorer.score("", [""]) == [0.0]
    # repeated terms keep helping, with diminishing returns
    one, two = scorer.score("law", ["law"])[0], scorer.score("law", ["law law"])[0]
    assert two > one


def test_tcp_transport_serves_connections():
    env = dict(os.environ)
    env["PYTHONPATH"] = BRIDGE_SRC + os.pathsep + env.get("PYTHONPATH", "")
    proc = subprocess.Popen(
        [sys.executable, "-m", "cfir_bridge", "--fake", "--port", "0"],
        stderr=subprocess.PIPE, text=True, env=env,
    )
    try:
        port = int(re.search(r"listening on (\d+)", proc.stderr.readline()).group(1))
        for _ in range(2):  # sequential connections are accepted
            with socket.create_connection(("127.0.0.1", port), timeout=10) as sock:
                reader = sock.makefile("r")
                hello = json.loads(reader.readline())
                assert hello["proto"] == 1
                sock.sendall((json.dumps(
                    {"id": 1, "query": "law", "docs": [{"doc_id": "a", "text": "law"}]}
                ) + "\n").encode())
                assert json.loads(reader.readline())["scores"] == [0.5]
    finally:
        proc.kill()
        proc.wait(timeout=10)
