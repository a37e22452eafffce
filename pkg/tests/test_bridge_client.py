"""Client-side protocol behavior, exercised against a local stub server
(the real bridge server lives in its own package and has its own suite)."""

import os
import sys

import pytest

from cfir.bridge_client import (
    BridgeClient,
    BridgeConnectionError,
    BridgeProtocolError,
    BridgeScoreMismatchError,
    BridgeTimeoutError,
    external_rank,
)
from cfir.corpus import Document

STUB = os.path.join(os.path.dirname(__file__), "stub_bridge.py")


def stub_cmd(mode="ok"):
    return f"{sys.executable} {STUB} {mode}"


def make_docs(texts):
    return [Document.from_text(f"d{chr(ord('A') + i)}", t) for i, t in enumerate(texts)]


def test_scores_align_with_requested_docs():
    client = BridgeClient(stub_cmd(), timeout=10)
    try:
        scores = client.score("law riot", [("dA", "law stone"), ("dB", "law riot")])
        assert len(scores) == 2
        assert scores[1] > scores[0]
    finally:
        client.close()


def test_external_rank_orders_by_bridge_scores():
    docs = make_docs(["stone garden law", "law riot court riot"])
    client = BridgeClient(stub_cmd(), timeout=10)
    try:
        ranked = external_rank(client, __import__("cfir.corpus", fromlist=["Query"]).Query.from_text("q", "law riot"), docs)
        assert [d for d, _ in ranked.entries] == ["dB", "dA"]
    finally:
        client.close()


def test_score_count_mismatch_is_distinct_error():
    client = BridgeClient(stub_cmd("short"), timeout=10)
    try:
        with pytest.raises(BridgeScoreMismatchError):
            client.score("law", [("dA", "law"), ("dB", "riot")])
    finally:
        client.close()


def test_malformed_response_is_protocol_error():
    client = BridgeClient(stub_cmd("garbage"), timeout=10)
    try:
        with pytest.raises(BridgeProtocolError):
            client.score("law", [("dA", "law")])
    finally:
        client.close()


def test_timeout_is_distinct_error():
    client = BridgeClient(stub_cmd("silent"), timeout=0.3)
    try:
        with pytest.raises(BridgeTimeoutError):
            client.score("law", [("dA", "law")])
    finally:
        client.close()


def test_bad_handshake_rejected():
    with pytest.raises(BridgeProtocolError, match="handshake"):
        BridgeClient(stub_cmd("badhello"), timeout=10)


def test_unreachable_bridge_is_connection_error():
    with pytest.raises(BridgeConnectionError):
        BridgeClient("/no/such/binary-anywhere", timeout=2)
    with pytest.raises(BridgeConnectionError):
        BridgeClient("tcp:127.0.0.1:1", timeout=2)
