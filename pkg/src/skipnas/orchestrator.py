"""Two-level search loop: outer particle swarm over architectures,
inner binary GA over skip connections per particle.

Every source of randomness is derived from (search seed, role,
generation, particle index), so results are bit-reproducible under the
surrogate evaluator regardless of how many inner evolutions run
concurrently.  All engine state mutates only at generation boundaries,
which is what makes checkpoints resumable mid-search.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

from . import ga as ga_engine
from . import pso as pso_engine
from .fitness import (DEFAULT_LR_CANDIDATES, EvalRequest, EvaluationError,
                      FitnessRecord, SurrogateEvaluator, TrainerClient,
                      probe_learning_rate)
from .ga import GaParams
from .genome import (ArchGenome, ConnGenome, SearchRanges, conn_offsets,
                     decode_position, empty_conn, genome_to_dict, random_conn)
from .pso import Particle, PsoParams

CHECKPOINT_VERSION = 1


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a tuple of labels and indices."""
    digest = hashlib.sha256(".".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class SearchConfig:
    ranges: SearchRanges = field(default_factory=SearchRanges)
    pso: PsoParams = field(default_factory=PsoParams)
    ga: GaParams = field(default_factory=GaParams)
    outer_population: int = 20
    outer_generations: int = 10
    evaluator: str = "surrogate"
    oracle_seed: int = 1000003
    trainer_endpoint: str | None = None
    dataset: dict | None = None
    seed: int = 0
    lr_candidates: tuple[float, ...] = DEFAULT_LR_CANDIDATES
    epochs: int = 5
    second_level_data_fraction: float = 0.5
    num_classes: int = 10
    checkpoint_interval: int = 1
    concurrency: int = 1

    def __post_init__(self):
        if self.outer_population < 2:
            raise ConfigError("outer population must be >= 2")
        if self.outer_generations < 0:
            raise ConfigError("outer generations must be >= 0")
        if self.evaluator not in ("surrogate", "trainer"):
            raise ConfigError(f"unknown evaluator {self.evaluator!r}")
        if self.evaluator == "trainer" and not self.trainer_endpoint:
            raise ConfigError("trainer evaluator requires an endpoint")
        if not 0.0 < self.second_level_data_fraction <= 1.0:
            raise ConfigError("second-level data fraction must lie in (0, 1]")
        if self.concurrency < 1 or self.checkpoint_interval < 1:
            raise ConfigError("concurrency and checkpoint interval must be >= 1")

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.ranges.input_channels, *self.ranges.input_spatial)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ranges"] = asdict(self.ranges)
        d["pso"] = asdict(self.pso)
        d["ga"] = asdict(self.ga)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        d = dict(d)
        try:
            ranges = dict(d.pop("ranges", {}))
            for key in ("layers_range", "growth_range", "input_spatial"):
                if key in ranges:
                    ranges[key] = tuple(ranges[key])
            d["ranges"] = SearchRanges(**ranges)
            d["pso"] = PsoParams(**d.pop("pso", {}))
            d["ga"] = GaParams(**d.pop("ga", {}))
            if "lr_candidates" in d:
                d["lr_candidates"] = tuple(d["lr_candidates"])
        except TypeError as exc:
            raise ConfigError(f"bad config field: {exc}") from exc
        return cls(**d)


@dataclass(frozen=True)
class SearchResult:
    global_best: tuple[ArchGenome, ConnGenome, FitnessRecord] | None
    history: tuple[dict, ...]
    evaluation_count: int

    def to_dict(self) -> dict:
        best = None
        if self.global_best is not None:
            arch, conn, record = self.global_best
            best = {"genome": genome_to_dict(arch, conn),
                    "record": record.to_dict()}
        return {"global_best": best, "history": list(self.history),
                "evaluation_count": self.evaluation_count}

    def to_json(self) -> str:
        return _canonical(self.to_dict())


def build_evaluator(config: SearchConfig):
    if config.evaluator == "surrogate":
        return SurrogateEvaluator(config.ranges, config.oracle_seed,
                                  config.lr_candidates)
    dataset = dict(config.dataset or {})
    dataset.setdefault("num_classes", config.num_classes)
    return TrainerClient(config.trainer_endpoint, dataset,
                         input_shape=config.input_shape)


class Search:
    """Stateful search that can be checkpointed and resumed."""

    def __init__(self, config: SearchConfig, evaluator=None,
                 report_path=None):
        self.config = config
        self.evaluator = evaluator or build_evaluator(config)
        self.report_path = report_path
        self.generation = 0
        self.evaluation_count = 0
        self.history: list[dict] = []
        self.gbest: dict | None = None
        self._cache: dict | None = {} if config.evaluator == "surrogate" else None
        rng = random.Random(derive_seed(config.seed, "init"))
        from .genome import random_arch
        self.particles = [pso_engine.from_arch(random_arch(config.ranges, rng))
                          for _ in range(config.outer_population)]
        self.pbest_records: list[dict | None] = [None] * config.outer_population

    # -- evaluation ----------------------------------------------------

    def _evaluate(self, arch: ArchGenome, conn: ConnGenome, chosen_lr,
                  data_fraction: float, seed: int, request_id: str,
                  counter: list) -> FitnessRecord:
        key = None
        if self._cache is not None:
            key = (_canonical(genome_to_dict(arch)), conn.bitstring(),
                   self.evaluator.name, data_fraction, chosen_lr, seed)
            hit = self._cache.get(key)
            if hit is not None:
                return hit
        req = EvalRequest(request_id=request_id, epochs=self.config.epochs,
                          lr_candidates=self.config.lr_candidates,
                          chosen_lr=chosen_lr, data_fraction=data_fraction,
                          seed=seed)
        record = self.evaluator.evaluate(arch, conn, req)
        counter[0] += 1
        if key is not None:
            self._cache[key] = record
        return record

    def inner_evolve(self, arch: ArchGenome, rng: random.Random, seed: int,
                     request_prefix: str) -> tuple[ConnGenome, FitnessRecord, int]:
        """Probe the learning rate, run the inner GA, and confirm the
        winner on the full data fraction."""
        cfg = self.config
        counter = [0]

        class _CountingProxy:
            name = self.evaluator.name

            def evaluate(proxy, a, c, req):  # noqa: N805
                return self._evaluate(a, c, req.chosen_lr, req.data_fraction,
                                      req.seed, req.request_id, counter)

        chosen_lr = probe_learning_rate(
            arch, cfg.lr_candidates, _CountingProxy(), epochs=cfg.epochs,
            data_fraction=cfg.second_level_data_fraction, seed=seed,
            request_prefix=request_prefix)

        def eval_one(conn: ConnGenome, rid: str, fraction: float) -> FitnessRecord:
            return self._evaluate(arch, conn, chosen_lr, fraction, seed, rid,
                                  counter)

        if sum(length for _, length in conn_offsets(arch)) == 0:
            conn = empty_conn(arch)
            record = eval_one(conn, f"{request_prefix}.empty", 1.0)
            return conn, record, counter[0]

        ga = cfg.ga
        population = [random_conn(arch, rng) for _ in range(ga.population_size)]
        best_conn, best_fitness = None, None
        for gen in range(1, ga.generations + 1):
            if gen > 1:
                population = ga_engine.evolve_generation(
                    population, fitnesses, ga, rng)
            fitnesses = []
            for idx, individual in enumerate(population):
                rec = eval_one(individual, f"{request_prefix}.g{gen}.i{idx}",
                               cfg.second_level_data_fraction)
                fitnesses.append(rec.fitness)
                if best_fitness is None or rec.fitness > best_fitness:
                    best_conn, best_fitness = individual, rec.fitness
        record = eval_one(best_conn, f"{request_prefix}.confirm", 1.0)
        return best_conn, record, counter[0]

    # -- generations ---------------------------------------------------

    def _run_generation(self, gen: int) -> None:
        cfg = self.config
        started = time.monotonic()
        particles = list(self.particles)
        if self.gbest is not None:
            gpos = tuple(self.gbest["position"])
            for i, p in enumerate(particles):
                rng = random.Random(derive_seed(cfg.seed, "pso", gen, i))
                p = pso_engine.update_particle(p, gpos, cfg.pso, rng)
                p = pso_engine.change_block_count(p, gpos, cfg.pso, cfg.ranges, rng)
                particles[i] = p

        def task(i: int):
            p = particles[i]
            arch = decode_position(p.position, cfg.ranges)
            seed = derive_seed(cfg.seed, "inner", gen, i)
            rng = random.Random(seed)
            return self.inner_evolve(arch, rng, seed, f"g{gen}.p{i}")

        indices = range(len(particles))
        if cfg.concurrency > 1:
            with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
                results = list(pool.map(task, indices))
        else:
            results = [task(i) for i in indices]

        fitnesses = []
        for i, (conn, record, evals) in zip(indices, results):
            self.evaluation_count += evals
            previous = particles[i].best_fitness
            particles[i] = particles[i].record_best(record.fitness, conn)
            if particles[i].best_fitness != previous:
                self.pbest_records[i] = record.to_dict()
            fitnesses.append(record.fitness)
            p = particles[i]
            # ties keep the incumbent global best
            if p.best_fitness is not None and (
                    self.gbest is None or p.best_fitness > self.gbest["fitness"]):
                self.gbest = {
                    "position": list(p.best_position),
                    "conn_bits": p.best_conn.bitstring(),
                    "fitness": p.best_fitness,
                    "record": self.pbest_records[i],
                }

        # commit the generation atomically
        self.particles = particles
        self.generation = gen
        entry = {
            "generation": gen,
            "best_fitness": self.gbest["fitness"] if self.gbest else None,
            "mean_fitness": sum(fitnesses) / len(fitnesses),
            "evaluation_count": self.evaluation_count,
        }
        self.history.append(entry)
        if self.report_path is not None:
            line = dict(entry, wall_time=time.monotonic() - started)
            with open(self.report_path, "a") as fh:
                fh.write(json.dumps(line, sort_keys=True) + "\n")

    def run(self, until_generation: int | None = None,
            checkpoint_dir=None) -> SearchResult:
        """Run outer generations up to the configured budget, optionally
        checkpointing into ``checkpoint_dir`` after each interval."""
        target = self.config.outer_generations
        if until_generation is not None:
            target = min(target, until_generation)
        while self.generation < target:
            self._run_generation(self.generation + 1)
            if checkpoint_dir is not None and (
                    self.generation % self.config.checkpoint_interval == 0
                    or self.generation == target):
                self.save_checkpoint(checkpoint_dir)
        return self.result()

    def result(self) -> SearchResult:
        best = None
        if self.gbest is not None:
            arch = decode_position(self.gbest["position"], self.config.ranges)
            conn = ConnGenome(tuple(int(c) for c in self.gbest["conn_bits"]),
                              conn_offsets(arch))
            best = (arch, conn, FitnessRecord(**self.gbest["record"]))
        return SearchResult(best, tuple(self.history), self.evaluation_count)

    # -- checkpointing -------------------------------------------------

    def _state_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "generation": self.generation,
            "evaluation_count": self.evaluation_count,
            "history": self.history,
            "gbest": self.gbest,
            "particles": [{
                "position": list(p.position),
                "velocity": list(p.velocity),
                "best_position": list(p.best_position) if p.best_position else None,
                "best_fitness": p.best_fitness,
                "best_conn_bits": p.best_conn.bitstring() if p.best_conn else None,
                "best_record": rec,
            } for p, rec in zip(self.particles, self.pbest_records)],
        }

    def checkpoint(self) -> bytes:
        state = self._state_dict()
        body = _canonical(state)
        payload = {"version": CHECKPOINT_VERSION, "state": state,
                   "checksum": hashlib.sha256(body.encode()).hexdigest()}
        return (_canonical(payload) + "\n").encode()

    def save_checkpoint(self, checkpoint_dir) -> str:
        import os
        os.makedirs(checkpoint_dir, exist_ok=True)
        path = os.path.join(checkpoint_dir, f"gen{self.generation:04d}.ckpt.json")
        with open(path, "wb") as fh:
            fh.write(self.checkpoint())
        return path

    @classmethod
    def resume(cls, blob: bytes, evaluator=None, report_path=None) -> "Search":
        try:
            payload = json.loads(blob.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupted checkpoint: {exc}") from exc
        if not isinstance(payload, dict) or "state" not in payload:
            raise CheckpointError("corrupted checkpoint: missing state")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"checkpoint version {payload.get('version')!r} not supported")
        state = payload["state"]
        if hashlib.sha256(_canonical(state).encode()).hexdigest() != \
                payload.get("checksum"):
            raise CheckpointError("checkpoint checksum mismatch")

        config = SearchConfig.from_dict(state["config"])
        search = cls(config, evaluator=evaluator, report_path=report_path)
        search.generation = state["generation"]
        search.evaluation_count = state["evaluation_count"]
        search.history = list(state["history"])
        search.gbest = state["gbest"]
        search.pbest_records = [pd.get("best_record") for pd in state["particles"]]
        particles = []
        for pd in state["particles"]:
            best_conn = None
            if pd["best_conn_bits"] is not None and pd["best_position"] is not None:
                arch = decode_position(pd["best_position"], config.ranges)
                best_conn = ConnGenome(
                    tuple(int(c) for c in pd["best_conn_bits"]),
                    conn_offsets(arch))
            particles.append(Particle(
                position=tuple(pd["position"]),
                velocity=tuple(pd["velocity"]),
                best_position=tuple(pd["best_position"]) if pd["best_position"] else None,
                best_fitness=pd["best_fitness"],
                best_conn=best_conn))
        search.particles = particles
        return search


def run_search(config: SearchConfig, evaluator=None, report_path=None,
               checkpoint_dir=None) -> SearchResult:
    """Convenience wrapper: build a Search and run it to completion."""
    return Search(config, evaluator=evaluator,
                  report_path=report_path).run(checkpoint_dir=checkpoint_dir)
