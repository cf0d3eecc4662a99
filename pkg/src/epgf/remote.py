"""HTTP/JSON transport for next-token log-probabilities.

Endpoints served by :func:`serve`:

``GET /v1/info``
    ``{"model_id", "order", "alphabet_hash", "vocab_size", "tags"}``
``POST /v1/logits``
    body ``{"context": [ids], "alphabet_hash": str}``, reply
    ``{"logprobs": [float | null], "model_id": str}``
``POST /v1/logits_batch``
    body ``{"contexts": [[ids], ...], "alphabet_hash": str}``, reply
    ``{"logprobs": [[float | null], ...], "model_id": str}``

``null`` encodes a log-probability of minus infinity. Floats travel in
shortest round-trip form, so a client sees exactly the server's values.
Malformed bodies get 400, an alphabet mismatch 409.
"""

from __future__ import annotations

import json
import logging
import math
import os
import socket
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .core import Alphabet
from .errors import BindFailure, EPGFError, ModelFailure, NonNormalizedResponse, ProtocolMismatch, Unreachable
from .model import TokenDistribution

log = logging.getLogger(__name__)

ENDPOINT_ENV = "EPGF_MODEL_ENDPOINT"


@dataclass(frozen=True)
class LogitsRequest:
    context: tuple[int, ...]
    alphabet_hash: str

    def to_json(self) -> dict:
        return {"context": list(self.context), "alphabet_hash": self.alphabet_hash}


@dataclass(frozen=True, eq=False)
class LogitsResponse:
    logprobs: np.ndarray
    model_id: str

    def __post_init__(self):
        mass = float(np.exp(self.logprobs).sum())
        if abs(mass - 1.0) > 1e-6:
            raise NonNormalizedResponse(f"response mass {mass!r} deviates from 1")


def encode_logprobs(lp) -> list:
    return [None if v == -math.inf else float(v) for v in np.asarray(lp, dtype=float).tolist()]


def decode_logprobs(values) -> np.ndarray:
    if not isinstance(values, list):
        raise ValueError("logprobs must be a list")
    return np.array([-math.inf if v is None else float(v) for v in values], dtype=np.float64)


class _BadRequest(Exception):
    def __init__(self, status: int, msg: str):
        super().__init__(msg)
        self.status = status


def _parse_context(raw, vocab: int) -> tuple[int, ...]:
    if not isinstance(raw, list):
        raise _BadRequest(400, "context must be a list of token ids")
    out = []
    for t in raw:
        if isinstance(t, bool) or not isinstance(t, int) or not 0 <= t < vocab:
            raise _BadRequest(400, f"token id {t!r} outside vocabulary of size {vocab}")
        out.append(t)
    return tuple(out)


def _make_handler(model):
    alphabet = model.alphabet
    info = {
        "model_id": model.model_id,
        "order": int(getattr(model, "order", 0)),
        "alphabet_hash": alphabet.hash,
        "vocab_size": alphabet.size,
        "tags": list(alphabet.condition_tokens),
    }

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s " + fmt, self.address_string(), *args)

        def _reply(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path.rstrip("/") == "/v1/info":
                self._reply(200, info)
            else:
                self._reply(404, {"error": f"no such endpoint {self.path}"})

        def do_POST(self):
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length)
            path = self.path.rstrip("/")
            try:
                if path not in ("/v1/logits", "/v1/logits_batch"):
                    raise _BadRequest(404, f"no such endpoint {self.path}")
                try:
                    body = json.loads(raw)
                except (json.JSONDecodeError, UnicodeDecodeError):
                    raise _BadRequest(400, "body is not valid JSON") from None
                if not isinstance(body, dict) or not isinstance(body.get("alphabet_hash"), str):
                    raise _BadRequest(400, "body must be an object with an alphabet_hash string")
                if body["alphabet_hash"] != alphabet.hash:
                    raise _BadRequest(409, "alphabet hash mismatch")
                if path == "/v1/logits":
                    ctx = _parse_context(body.get("context"), alphabet.size)
                    payload = encode_logprobs(model.logprobs(ctx))
                else:
                    raw_ctxs = body.get("contexts")
                    if not isinstance(raw_ctxs, list):
                        raise _BadRequest(400, "contexts must be a list")
                    ctxs = [_parse_context(c, alphabet.size) for c in raw_ctxs]
                    payload = [encode_logprobs(model.logprobs(c)) for c in ctxs]
            except _BadRequest as exc:
                self._reply(exc.status, {"error": str(exc)})
                return
            except EPGFError as exc:
                self._reply(400, {"error": str(exc)})
                return
            self._reply(200, {"logprobs": payload, "model_id": model.model_id})

    return Handler


class ServerHandle:
    def __init__(self, server: ThreadingHTTPServer, thread: threading.Thread):
        self._server = server
        self._thread = thread
        host, port = server.server_address[:2]
        self.url = f"http://{host}:{port}"

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join()

    def wait(self) -> None:
        self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def serve(model, bind: str = "127.0.0.1:0") -> ServerHandle:
    """Start serving ``model`` on a background thread and return a handle."""
    host, _, port = bind.rpartition(":")
    try:
        server = ThreadingHTTPServer((host or "127.0.0.1", int(port)), _make_handler(model))
    except (OSError, ValueError) as exc:
        raise BindFailure(f"cannot bind {bind!r}: {exc}") from exc
    server.daemon_threads = True
    thread = threading.Thread(target=server.serve_forever, name="epgf-serve", daemon=True)
    thread.start()
    handle = ServerHandle(server, thread)
    log.info("serving %s at %s", model.model_id, handle.url)
    return handle


class RemoteModel:
    """Client for a logits server; usable anywhere a local model is.

    The alphabet handshake happens once, at construction. Transport
    failures are retried ``retries`` times before :class:`Unreachable`.
    """

    def __init__(self, endpoint: str | None = None, alphabet: Alphabet | None = None,
                 retries: int = 3, timeout: float = 10.0, backoff: float = 0.05):
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ModelFailure(f"no endpoint given and {ENDPOINT_ENV} is unset")
        self.endpoint = endpoint.rstrip("/")
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff
        info = self._call("GET", "/v1/info")
        try:
            tags = info["tags"]
            remote_hash = info["alphabet_hash"]
            self.model_id = str(info["model_id"])
            self.order = int(info["order"])
        except (KeyError, TypeError, ValueError):
            raise ProtocolMismatch("server /v1/info reply is missing fields") from None
        served = Alphabet.with_tags(tags)
        if served.hash != remote_hash:
            raise ProtocolMismatch("server alphabet hash disagrees with its tag list")
        if alphabet is not None and alphabet.hash != remote_hash:
            raise ProtocolMismatch(f"alphabet hash mismatch: local {alphabet.hash}, remote {remote_hash}")
        self.alphabet = alphabet or served

    def _call(self, method: str, path: str, body: dict | None = None):
        data = None if body is None else json.dumps(body).encode()
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * attempt)
            req = urllib.request.Request(self.endpoint + path, data=data, method=method,
                                         headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read())
            except urllib.error.HTTPError as exc:
                if exc.code == 409:
                    raise ProtocolMismatch(f"{path}: alphabet hash rejected by server") from None
                if exc.code < 500:
                    raise ModelFailure(f"{path}: HTTP {exc.code}: {exc.read()[:200]!r}") from None
                last = exc
            except (urllib.error.URLError, ConnectionError, socket.timeout, TimeoutError) as exc:
                last = exc
            except json.JSONDecodeError:
                raise ProtocolMismatch(f"{path}: reply is not JSON") from None
        raise Unreachable(f"{self.endpoint}{path} unreachable after {self.retries + 1} attempts: {last}")

    def _check(self, lp: np.ndarray) -> np.ndarray:
        if lp.size != self.alphabet.size:
            raise ProtocolMismatch(f"reply has {lp.size} entries, expected {self.alphabet.size}")
        mass = float(np.exp(lp).sum())
        if not abs(mass - 1.0) <= 1e-4:
            raise NonNormalizedResponse(f"reply mass {mass!r} deviates from 1 by more than 1e-4")
        lp.setflags(write=False)
        return lp

    def logprobs(self, context) -> np.ndarray:
        reply = self._call("POST", "/v1/logits",
                           {"context": [int(t) for t in context], "alphabet_hash": self.alphabet.hash})
        try:
            return self._check(decode_logprobs(reply["logprobs"]))
        except (KeyError, TypeError, ValueError):
            raise ProtocolMismatch("malformed /v1/logits reply") from None

    def logprobs_batch(self, contexts) -> list[np.ndarray]:
        reply = self._call("POST", "/v1/logits_batch", {
            "contexts": [[int(t) for t in c] for c in contexts],
            "alphabet_hash": self.alphabet.hash,
        })
        try:
            rows = reply["logprobs"]
            if len(rows) != len(contexts):
                raise ValueError
            return [self._check(decode_logprobs(r)) for r in rows]
        except (KeyError, TypeError, ValueError):
            raise ProtocolMismatch("malformed /v1/logits_batch reply") from None


_clients: dict[str, RemoteModel] = {}
_clients_lock = threading.Lock()


def query_distribution(endpoint, context) -> TokenDistribution:
    """Fetch p(. | context) from a server; clients are cached per URL."""
    if isinstance(endpoint, RemoteModel):
        client = endpoint
    else:
        with _clients_lock:
            client = _clients.get(endpoint)
            if client is None:
                client = _clients[endpoint] = RemoteModel(endpoint)
    toks = tuple(int(t) for t in context)
    if not toks or toks[0] != client.alphabet.bos:
        toks = (client.alphabet.bos,) + toks
    return TokenDistribution.from_logprobs(client.logprobs(toks))
