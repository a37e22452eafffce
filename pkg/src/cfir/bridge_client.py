"""Client for external scorers speaking newline-delimited JSON, over a child
process's stdio or a TCP socket.

Endpoint forms accepted by the `--bridge` flag:
    tcp:HOST:PORT          connect to a running scorer
    <shell command>        spawn the command and talk over its stdin/stdout

The server speaks first with `{"op": "hello", "proto": 1, "name": ...}`; each
request `{"id", "query", "docs": [{"doc_id", "text"}]}` is answered by
`{"id", "scores": [...]}` with one score per doc. Failure modes are reported
distinctly: connection, timeout, malformed response, score-count mismatch.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import socket
import subprocess
from typing import Iterable

from .corpus import Document, Query

PROTO_VERSION = 1
DEFAULT_TIMEOUT = 30.0


class BridgeError(Exception):
    pass


class BridgeConnectionError(BridgeError):
    pass


class BridgeTimeoutError(BridgeError):
    pass


class BridgeProtocolError(BridgeError):
    pass


class BridgeScoreMismatchError(BridgeError):
    pass


class _StdioTransport:
    def __init__(self, command: str):
        try:
            self.proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise BridgeConnectionError(f"cannot spawn bridge {command!r}: {exc}") from exc
        self._buf = b""

    def send_line(self, line: bytes) -> None:
        if self.proc.poll() is not None:
            raise BridgeConnectionError("bridge process exited")
        try:
            self.proc.stdin.write(line)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeConnectionError(f"bridge pipe closed: {exc}") from exc

    def recv_line(self, timeout: float) -> bytes:
        fd = self.proc.stdout.fileno()
        while b"\n" not in self._buf:
            ready, _, _ = select.select([fd], [], [], timeout)
            if not ready:
                raise BridgeTimeoutError(f"no response within {timeout}s")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise BridgeConnectionError("bridge closed its output")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def close(self) -> None:
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class _TcpTransport:
    def __init__(self, host: str, port: int, timeout: float):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise BridgeConnectionError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._buf = b""

    def send_line(self, line: bytes) -> None:
        try:
            self.sock.sendall(line)
        except OSError as exc:
            raise BridgeConnectionError(f"bridge socket closed: {exc}") from exc

    def recv_line(self, timeout: float) -> bytes:
        self.sock.settimeout(timeout)
        while b"\n" not in self._buf:
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout as exc:
                raise BridgeTimeoutError(f"no response within {timeout}s") from exc
            except OSError as exc:
                raise BridgeConnectionError(str(exc)) from exc
            if not chunk:
                raise BridgeConnectionError("bridge closed the connection")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class BridgeClient:
    """One connection, one in-flight request at a time."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        self.endpoint = endpoint
        self.timeout = timeout
        self._next_id = 1
        if endpoint.startswith("tcp:"):
            rest = endpoint[len("tcp:"):].lstrip("/")
            host, _, port = rest.rpartition(":")
            if not host or not port.isdigit():
                raise BridgeConnectionError(f"bad tcp endpoint {endpoint!r}")
            self._transport = _TcpTransport(host, int(port), timeout)
        else:
            self._transport = _StdioTransport(endpoint)
        hello = self._read_object()
        if hello.get("op") != "hello" or hello.get("proto") != PROTO_VERSION:
            raise BridgeProtocolError(f"bad handshake: {hello!r}")
        self.server_name = str(hello.get("name", "external"))

    def _read_object(self) -> dict:
        line = self._transport.recv_line(self.timeout)
        try:
            obj = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BridgeProtocolError(f"malformed response line: {line[:200]!r}") from exc
        if not isinstance(obj, dict):
            raise BridgeProtocolError(f"response is not an object: {obj!r}")
        return obj

    def score(self, query_text: str, docs: list[tuple[str, str]]) -> list[float]:
        req_id = self._next_id
        self._next_id += 1
        request = {
            "id": req_id,
            "query": query_text,
            "docs": [{"doc_id": d, "text": t} for d, t in docs],
        }
        self._transport.send_line(json.dumps(request).encode("utf-8") + b"\n")
        response = self._read_object()
        if response.get("id") != req_id:
            raise BridgeProtocolError(
                f"response id {response.get('id')!r} does not echo request id {req_id}"
            )
        if "error" in response:
            raise BridgeProtocolError(f"bridge error: {response['error']}")
        scores = response.get("scores")
        if not isinstance(scores, list) or not all(
            isinstance(s, (int, float)) for s in scores
        ):
            raise BridgeProtocolError("response has no well-formed 'scores' list")
        if len(scores) != len(docs):
            raise BridgeScoreMismatchError(
                f"got {len(scores)} scores for {len(docs)} docs"
            )
        return [float(s) for s in scores]

    def close(self) -> None:
        self._transport.close()


class ExternalScorer:
    """Retrieval-model adapter over a bridge connection."""

    name = "external"

    def __init__(self, client: BridgeClient, docs: list[Document], batch_size: int = 64):
        self.client = client
        self.docs = {d.doc_id: d for d in docs}
        self._sorted_ids = sorted(self.docs)
        self.batch_size = batch_size

    def all_doc_ids_sorted(self) -> list[str]:
        return self._sorted_ids

    def score_doc(self, query: Query, doc: Document) -> float:
        return self.client.score(query.raw_text, [(doc.doc_id, doc.raw_text)])[0]

    def scores_for(self, query: Query, doc_ids: Iterable[str] | None = None) -> dict[str, float]:
        ids = self._sorted_ids if doc_ids is None else list(doc_ids)
        out: dict[str, float] = {}
        for start in range(0, len(ids), self.batch_size):
            chunk = ids[start:start + self.batch_size]
            payload = []
            for doc_id in chunk:
                doc = self.docs.get(doc_id)
                if doc is None:
                    raise ValueError(f"unknown doc_id: {doc_id!r}")
                payload.append((doc_id, doc.raw_text))
            for doc_id, score in zip(chunk, self.client.score(query.raw_text, payload)):
                out[doc_id] = score
        return out


def external_rank(client: BridgeClient, query: Query, docs: list[Document],
                  cutoff: int = 100):
    """Rank documents by bridge scores under the standard tie rule."""
    from .retrieval import rank

    return rank(ExternalScorer(client, docs), query, doc_ids=[d.doc_id for d in docs],
                cutoff=cutoff)
