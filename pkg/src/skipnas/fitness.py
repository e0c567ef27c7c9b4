"""Fitness evaluation contract and the two built-in evaluators.

Fitness is a value in [0, 1].  The surrogate evaluator is a
deterministic synthetic landscape with a known optimum, used for tests
and desk-scale benchmarking.  The trainer client speaks a
newline-delimited JSON protocol to an external training service and
reports its test-part accuracy.
"""

from __future__ import annotations

import json
import random
import socket
from dataclasses import dataclass, field

from .genome import (ArchGenome, ConnGenome, SearchRanges, conn_segment_length,
                     full_conn, random_arch, random_conn)
from .netgraph import build_graph, export_graph

PROTOCOL_VERSION = 1
DEFAULT_LR_CANDIDATES = (0.9, 0.1, 0.01)


class EvaluationError(Exception):
    """Evaluator failed to produce a fitness."""


class EvaluationTimeout(EvaluationError):
    """The trainer did not answer within the configured timeout."""


class ProtocolError(EvaluationError):
    """The trainer answered with a malformed or invalid payload."""

    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


@dataclass(frozen=True)
class EvalRequest:
    request_id: str
    graph: str = ""
    epochs: int = 5
    lr_candidates: tuple[float, ...] = DEFAULT_LR_CANDIDATES
    chosen_lr: float | None = None
    data_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise EvaluationError("epochs must be >= 1")
        if not 0.0 < self.data_fraction <= 1.0:
            raise EvaluationError("data_fraction must lie in (0, 1]")
        if self.chosen_lr is None and not self.lr_candidates:
            raise EvaluationError("need lr_candidates when chosen_lr is unset")


@dataclass(frozen=True)
class FitnessRecord:
    fitness: float
    chosen_lr: float
    evaluator: str
    seed: int
    wall_time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.fitness <= 1.0:
            raise EvaluationError(f"fitness {self.fitness} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"fitness": self.fitness, "chosen_lr": self.chosen_lr,
                "evaluator": self.evaluator, "seed": self.seed,
                "wall_time": self.wall_time}


class SurrogateEvaluator:
    """Deterministic synthetic fitness with a hidden optimum.

    The oracle seed (never the search seed) draws a hidden target
    architecture, a hidden skip-bit pattern and a preferred learning
    rate.  Fitness is

        0.5 * A + 0.4 * C + 0.1 * L

    where, with B/Bt the candidate/target block counts and D = 1 +
    2*max(B, Bt) the dimension universe:

    * A = 1 - (sum of per-dimension normalized distances) / D.  The
      block-count dimension contributes |B - Bt| / (max_blocks -
      min_blocks); each matched block (index < min(B, Bt)) contributes
      |L - Lt| / layer-span and |k - kt| / growth-span; every dimension
      of an unmatched block contributes 1.  Zero-width spans contribute
      0.
    * C = (number of bit positions agreeing with the hidden pattern,
      compared per block over the shared prefix of both segments) /
      (total hidden pattern length), or 1 when the pattern is empty.
    * L = 1 if chosen_lr equals the preferred rate, else 0.5.

    Fitness is exactly 1.0 iff the candidate equals the hidden target
    and uses the preferred rate.
    """

    name = "surrogate"

    def __init__(self, ranges: SearchRanges, oracle_seed: int,
                 lr_candidates: tuple[float, ...] = DEFAULT_LR_CANDIDATES):
        self.ranges = ranges
        self.oracle_seed = oracle_seed
        rng = random.Random(oracle_seed)
        self.target_arch = random_arch(ranges, rng)
        self.target_conn = random_conn(self.target_arch, rng)
        self.preferred_lr = rng.choice(list(lr_candidates))

    def _arch_score(self, arch: ArchGenome) -> float:
        t = self.target_arch
        b, bt = arch.num_blocks, t.num_blocks
        span_b = self.ranges.max_blocks - self.ranges.min_blocks
        span_l = self.ranges.layers_range[1] - self.ranges.layers_range[0]
        span_k = self.ranges.growth_range[1] - self.ranges.growth_range[0]
        dist = abs(b - bt) / span_b if span_b else 0.0
        for i in range(min(b, bt)):
            if span_l:
                dist += abs(arch.blocks[i].num_layers - t.blocks[i].num_layers) / span_l
            if span_k:
                dist += abs(arch.blocks[i].growth_rate - t.blocks[i].growth_rate) / span_k
        dist += 2.0 * (max(b, bt) - min(b, bt))
        return 1.0 - dist / (1 + 2 * max(b, bt))

    def _conn_score(self, arch: ArchGenome, conn: ConnGenome) -> float:
        total = len(self.target_conn)
        if total == 0:
            return 1.0
        matches = 0
        for i in range(min(arch.num_blocks, self.target_arch.num_blocks)):
            seg = conn.block_bits(i)
            tseg = self.target_conn.block_bits(i)
            matches += sum(1 for a, b in zip(seg, tseg) if a == b)
        return matches / total

    def evaluate(self, arch: ArchGenome, conn: ConnGenome,
                 req: EvalRequest) -> FitnessRecord:
        lr = req.chosen_lr
        lr_score = 1.0 if lr == self.preferred_lr else 0.5
        fitness = (0.5 * self._arch_score(arch)
                   + 0.4 * self._conn_score(arch, conn)
                   + 0.1 * lr_score)
        # guard against float dust at the optimum
        fitness = min(1.0, max(0.0, fitness))
        return FitnessRecord(fitness=fitness,
                             chosen_lr=lr if lr is not None else 0.0,
                             evaluator=self.name, seed=req.seed, wall_time=0.0)


class TrainerClient:
    """Client for the external trainer protocol (NDJSON over TCP).

    One request per connection; a transport failure is retried once
    with the same request_id, which the trainer must treat
    idempotently.
    """

    name = "trainer"

    def __init__(self, endpoint: str, dataset: dict,
                 input_shape: tuple[int, int, int] = (3, 32, 32),
                 timeout: float = 600.0):
        host, _, port = endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise EvaluationError(f"endpoint must be host:port, got {endpoint!r}")
        self.host, self.port = host, int(port)
        self.dataset = dataset
        self.input_shape = input_shape
        self.timeout = timeout

    def _roundtrip(self, line: bytes) -> bytes:
        with socket.create_connection((self.host, self.port),
                                      timeout=self.timeout) as sock:
            sock.sendall(line)
            buf = b""
            # on EOF, return the partial payload so the parser can report it
            while not buf.endswith(b"\n"):
                chunk = sock.recv(65536)
                if not chunk:
                    break
                buf += chunk
            if not buf:
                raise ConnectionError("connection closed without a response")
            return buf

    def evaluate(self, arch: ArchGenome, conn: ConnGenome,
                 req: EvalRequest) -> FitnessRecord:
        graph = build_graph(arch, conn, self.input_shape,
                            self.dataset["num_classes"])
        payload = {
            "protocol_version": PROTOCOL_VERSION,
            "request_id": req.request_id,
            "graph": json.loads(export_graph(graph, "canonical-text")),
            "epochs": req.epochs,
            "lr_candidates": list(req.lr_candidates),
            "chosen_lr": req.chosen_lr,
            "data_fraction": req.data_fraction,
            "seed": req.seed,
            "dataset": self.dataset,
        }
        line = (json.dumps(payload, sort_keys=True) + "\n").encode()
        try:
            raw = self._roundtrip(line)
        except socket.timeout as exc:
            raise EvaluationTimeout(
                f"trainer timed out after {self.timeout}s for {req.request_id}") from exc
        except OSError:
            try:
                raw = self._roundtrip(line)
            except socket.timeout as exc:
                raise EvaluationTimeout(
                    f"trainer timed out after {self.timeout}s for {req.request_id}") from exc
            except OSError as exc:
                raise EvaluationError(
                    f"trainer unreachable for {req.request_id}: {exc}") from exc
        return self._parse(raw, req)

    def _parse(self, raw: bytes, req: EvalRequest) -> FitnessRecord:
        try:
            data = json.loads(raw.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"unparseable trainer response: {exc}", raw)
        if data.get("request_id") != req.request_id:
            raise ProtocolError("response request_id mismatch", data)
        if "error" in data:
            raise EvaluationError(
                f"trainer error for {req.request_id}: {data['error']}")
        fitness = data.get("fitness")
        if not isinstance(fitness, (int, float)) or not 0.0 <= fitness <= 1.0:
            raise ProtocolError(f"fitness {fitness!r} outside [0, 1]", data)
        return FitnessRecord(fitness=float(fitness),
                             chosen_lr=float(data.get("chosen_lr") or 0.0),
                             evaluator=self.name, seed=req.seed,
                             wall_time=float(data.get("wall_time") or 0.0))


def probe_learning_rate(arch: ArchGenome, candidates, evaluator,
                        epochs: int = 5, data_fraction: float = 1.0,
                        seed: int = 0, request_prefix: str = "probe") -> float:
    """Pick the best initial learning rate for an architecture.

    Evaluates the densely connected baseline (all skip bits set) once
    per candidate and returns the argmax; ties go to the smaller rate.
    """
    if not candidates:
        raise EvaluationError("lr candidate list is empty")
    baseline = full_conn(arch)
    best_lr, best_fitness = None, None
    for idx, lr in enumerate(candidates):
        req = EvalRequest(request_id=f"{request_prefix}.lr{idx}",
                          epochs=epochs, lr_candidates=tuple(candidates),
                          chosen_lr=lr, data_fraction=data_fraction, seed=seed)
        try:
            record = evaluator.evaluate(arch, baseline, req)
        except EvaluationError as exc:
            raise EvaluationError(f"learning-rate probe failed at lr={lr}: {exc}") from exc
        if (best_fitness is None or record.fitness > best_fitness
                or (record.fitness == best_fitness and lr < best_lr)):
            best_lr, best_fitness = lr, record.fitness
    return best_lr
