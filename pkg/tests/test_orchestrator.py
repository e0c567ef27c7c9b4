import json
import random

import pytest

from skipnas.fitness import FitnessRecord, SurrogateEvaluator
from skipnas.ga import GaParams
from skipnas.genome import ArchGenome, BlockGene, SearchRanges
from skipnas.orchestrator import (CheckpointError, ConfigError, Search,
                                  SearchConfig, derive_seed, run_search)
from skipnas.pso import PsoParams

SMALL = dict(outer_population=4, outer_generations=3,
             ga=GaParams(population_size=6, generations=3),
             oracle_seed=1725)


class RecordingEvaluator:
    """Surrogate wrapper that logs every request it actually serves."""

    def __init__(self, config):
        self.inner = SurrogateEvaluator(config.ranges, config.oracle_seed,
                                        config.lr_candidates)
        self.name = self.inner.name
        self.requests = []

    def evaluate(self, arch, conn, req):
        self.requests.append(req)
        return self.inner.evaluate(arch, conn, req)


class TestConfig:
    def test_rejects_tiny_population(self):
        with pytest.raises(ConfigError):
            SearchConfig(outer_population=1)

    def test_trainer_requires_endpoint(self):
        with pytest.raises(ConfigError):
            SearchConfig(evaluator="trainer")

    def test_round_trips_through_dict(self):
        cfg = SearchConfig(**SMALL, seed=9)
        assert SearchConfig.from_dict(cfg.to_dict()) == cfg


class TestRunSearch:
    def test_zero_generations_gives_empty_result(self):
        cfg = SearchConfig(**dict(SMALL, outer_generations=0))
        result = run_search(cfg)
        assert result.global_best is None
        assert result.evaluation_count == 0
        assert result.history == ()

    def test_two_runs_identical_serialization(self):
        cfg = SearchConfig(**SMALL, seed=13)
        assert run_search(cfg).to_json() == run_search(cfg).to_json()

    def test_concurrency_does_not_change_results(self):
        base = run_search(SearchConfig(**SMALL, seed=5, concurrency=1))
        conc = run_search(SearchConfig(**SMALL, seed=5, concurrency=4))
        assert base.to_json() == conc.to_json()

    def test_global_best_is_max_over_history(self):
        cfg = SearchConfig(**SMALL, seed=2)
        result = run_search(cfg)
        bests = [h["best_fitness"] for h in result.history]
        assert bests == sorted(bests)
        assert result.global_best[2].fitness == bests[-1]

    def test_history_length_equals_generations(self):
        cfg = SearchConfig(**SMALL, seed=3)
        result = run_search(cfg)
        assert [h["generation"] for h in result.history] == [1, 2, 3]

    def test_evaluation_budget_per_generation(self):
        cfg = SearchConfig(seed=4, outer_population=6, outer_generations=2,
                           ga=GaParams(population_size=8, generations=4),
                           oracle_seed=1725)
        result = run_search(cfg)
        bound = 6 * (8 * 4 + 3)
        previous = 0
        for h in result.history:
            assert h["evaluation_count"] - previous <= bound
            previous = h["evaluation_count"]

    def test_data_fraction_policy(self):
        cfg = SearchConfig(**SMALL, seed=6)
        evaluator = RecordingEvaluator(cfg)
        Search(cfg, evaluator=evaluator).run()
        confirms = [r for r in evaluator.requests
                    if r.request_id.endswith(".confirm")]
        inner = [r for r in evaluator.requests
                 if ".g" in r.request_id and ".i" in r.request_id]
        assert confirms and inner
        assert all(r.data_fraction == 1.0 for r in confirms)
        assert all(r.data_fraction == cfg.second_level_data_fraction
                   for r in inner)

    def test_report_log_lines(self, tmp_path):
        path = tmp_path / "report.jsonl"
        cfg = SearchConfig(**SMALL, seed=7)
        Search(cfg, report_path=str(path)).run()
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert len(lines) == 3
        assert all({"generation", "best_fitness", "mean_fitness",
                    "evaluation_count", "wall_time"} <= set(l) for l in lines)


class TestInnerEvolve:
    def test_empty_connection_space(self):
        ranges = SearchRanges(layers_range=(1, 1), growth_range=(8, 8))
        cfg = SearchConfig(ranges=ranges, outer_population=2,
                           outer_generations=1,
                           ga=GaParams(population_size=4, generations=2))
        evaluator = RecordingEvaluator(cfg)
        search = Search(cfg, evaluator=evaluator)
        arch = ArchGenome((BlockGene(1, 8),))
        conn, record, evals = search.inner_evolve(arch, random.Random(0), 0, "t")
        assert len(conn) == 0
        # probe (3 candidates) plus exactly one evaluation
        assert evals == 3 + 1
        assert isinstance(record, FitnessRecord)

    def test_returned_fitness_is_max_of_evaluated(self):
        cfg = SearchConfig(**SMALL, seed=8)

        class Tracking(RecordingEvaluator):
            def __init__(self, config):
                super().__init__(config)
                self.fits = []

            def evaluate(self, arch, conn, req):
                rec = super().evaluate(arch, conn, req)
                self.fits.append(rec.fitness)
                return rec

        evaluator = Tracking(cfg)
        search = Search(cfg, evaluator=evaluator)
        arch = ArchGenome((BlockGene(4, 16), BlockGene(4, 24)))
        _, record, _ = search.inner_evolve(arch, random.Random(1), 1, "t")
        assert record.fitness == max(evaluator.fits)

    def test_inner_best_not_worse_than_first_generation(self):
        # elitism keeps the best individual, so more generations never hurt
        for seed in range(10):
            short = SearchConfig(**dict(SMALL, ga=GaParams(population_size=6,
                                                           generations=1)),
                                 seed=seed)
            long = SearchConfig(**dict(SMALL, ga=GaParams(population_size=6,
                                                          generations=10)),
                                seed=seed)
            arch = Search(short).evaluator.target_arch
            _, rec_short, _ = Search(short).inner_evolve(
                arch, random.Random(seed), seed, "t")
            _, rec_long, _ = Search(long).inner_evolve(
                arch, random.Random(seed), seed, "t")
            assert rec_long.fitness >= rec_short.fitness


class TestCheckpoint:
    def test_byte_stable(self):
        cfg = SearchConfig(**SMALL, seed=21)
        search = Search(cfg)
        search.run()
        assert search.checkpoint() == search.checkpoint()

    def test_split_run_equivalence(self):
        cfg = SearchConfig(seed=31, outer_population=4, outer_generations=8,
                           ga=GaParams(population_size=6, generations=3),
                           oracle_seed=1725)
        full = Search(cfg)
        full_result = full.run()

        first = Search(cfg)
        first.run(until_generation=5)
        resumed = Search.resume(first.checkpoint())
        resumed_result = resumed.run()
        assert resumed_result.to_json() == full_result.to_json()
        assert resumed.checkpoint() == full.checkpoint()

    def test_resume_garbage_fails_cleanly(self):
        with pytest.raises(CheckpointError):
            Search.resume(b"\x00\x01 garbage")

    def test_resume_detects_tampering(self):
        search = Search(SearchConfig(**SMALL, seed=1))
        search.run()
        blob = search.checkpoint()
        payload = json.loads(blob)
        payload["state"]["evaluation_count"] += 1
        with pytest.raises(CheckpointError, match="checksum"):
            Search.resume(json.dumps(payload).encode())

    def test_resume_rejects_unknown_version(self):
        search = Search(SearchConfig(**SMALL, seed=1))
        blob = search.checkpoint()
        payload = json.loads(blob)
        payload["version"] = 99
        with pytest.raises(CheckpointError, match="version"):
            Search.resume(json.dumps(payload).encode())


class TestDeriveSeed:
    def test_stable_and_distinct(self):
        assert derive_seed(1, "inner", 2, 3) == derive_seed(1, "inner", 2, 3)
        assert derive_seed(1, "inner", 2, 3) != derive_seed(1, "inner", 2, 4)
        assert derive_seed(1, "inner", 2, 3) != derive_seed(1, "pso", 2, 3)
