"""Newline-delimited JSON service for the evaluation protocol.

One request per connection (TCP) or per line (stdio).  Requests with a
previously seen request_id return the cached response byte-identically
without retraining.  Training is serialized: the service handles one
request at a time.
"""

from __future__ import annotations

import json
import logging
import socketserver
import sys
import time

from .data import DataError, DatasetSpec, load_dataset
from .model import BridgeError
from .training import train_request

PROTOCOL_VERSION = 1

log = logging.getLogger("trainer_bridge")


class Bridge:
    """Request handler with a per-request_id response cache."""

    def __init__(self, spec: DatasetSpec, batch_size: int = 64,
                 split_seed: int = 0):
        self.dataset = load_dataset(spec, split_seed=split_seed)
        self.batch_size = batch_size
        self.cache: dict[str, bytes] = {}
        self.training_runs = 0

    def handle_line(self, line: bytes) -> bytes:
        """Serve one NDJSON request line; always returns a response line."""
        try:
            payload = json.loads(line.decode())
            if not isinstance(payload, dict):
                raise ValueError("request must be a JSON object")
        except (UnicodeDecodeError, ValueError) as exc:
            return self._error(None, f"unparseable request: {exc}")
        request_id = payload.get("request_id")
        if not isinstance(request_id, str) or not request_id:
            return self._error(None, "missing request_id")
        if payload.get("protocol_version") != PROTOCOL_VERSION:
            return self._error(request_id,
                               f"unsupported protocol_version "
                               f"{payload.get('protocol_version')!r}")
        if request_id in self.cache:
            log.info("request %s served from cache", request_id)
            return self.cache[request_id]
        response = self._serve(request_id, payload)
        self.cache[request_id] = response
        return response

    def _serve(self, request_id: str, payload: dict) -> bytes:
        started = time.monotonic()
        try:
            graph = payload["graph"]
            epochs = int(payload.get("epochs", 5))
            lr_candidates = [float(v) for v in payload.get("lr_candidates", [])]
            chosen_lr = payload.get("chosen_lr")
            chosen_lr = None if chosen_lr is None else float(chosen_lr)
            data_fraction = float(payload.get("data_fraction", 1.0))
            seed = int(payload.get("seed", 0))
            if epochs < 1:
                raise ValueError("epochs must be >= 1")
            if not isinstance(graph, dict):
                raise ValueError("graph must be a JSON object")
        except (KeyError, TypeError, ValueError) as exc:
            return self._error(request_id, f"bad request: {exc}")
        try:
            fitness, lr, runs = train_request(
                graph, self.dataset, epochs, lr_candidates, chosen_lr,
                data_fraction, seed, self.batch_size)
            self.training_runs += runs
        except (BridgeError, DataError, ValueError) as exc:
            return self._error(request_id, str(exc))
        except RuntimeError as exc:
            # out-of-memory and kernel failures must not kill the service
            log.error("request %s failed: %s", request_id, exc)
            return self._error(request_id, f"training failed: {exc}")
        log.info("request %s: fitness %.4f at lr %g", request_id, fitness, lr)
        return self._encode({
            "protocol_version": PROTOCOL_VERSION,
            "request_id": request_id,
            "fitness": fitness,
            "chosen_lr": lr,
            "wall_time": time.monotonic() - started,
        })

    def _error(self, request_id: str | None, message: str) -> bytes:
        log.warning("request %s rejected: %s", request_id, message)
        return self._encode({
            "protocol_version": PROTOCOL_VERSION,
            "request_id": request_id,
            "error": message,
        })

    @staticmethod
    def _encode(response: dict) -> bytes:
        return (json.dumps(response, sort_keys=True) + "\n").encode()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        line = self.rfile.readline()
        if not line:
            return
        self.wfile.write(self.server.bridge.handle_line(line))


class BridgeServer(socketserver.TCPServer):
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], bridge: Bridge):
        super().__init__(address, _Handler)
        self.bridge = bridge


def serve_tcp(bridge: Bridge, host: str, port: int) -> None:
    """Serve requests over TCP until interrupted (one at a time)."""
    with BridgeServer((host, port), bridge) as server:
        log.info("listening on %s:%d", *server.server_address)
        server.serve_forever()


def serve_stdio(bridge: Bridge) -> None:
    """Serve requests over stdin/stdout (subprocess mode)."""
    for line in sys.stdin.buffer:
        if not line.strip():
            continue
        sys.stdout.buffer.write(bridge.handle_line(line))
        sys.stdout.buffer.flush()
