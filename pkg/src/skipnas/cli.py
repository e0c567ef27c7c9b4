"""Command-line interface: run searches, export evolved networks,
inspect report logs and probe learning rates."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .fitness import EvaluationError, probe_learning_rate
from .genome import GenomeError, conn_offsets, decode_position, genome_from_json
from .netgraph import build_graph, export_graph
from .orchestrator import (CheckpointError, ConfigError, Search, SearchConfig,
                           build_evaluator)

log = logging.getLogger("skipnas")


def _load_config(path: str | None, overrides: dict) -> SearchConfig:
    data = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return SearchConfig.from_dict(data)


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "evaluator": args.evaluator,
        "trainer_endpoint": args.trainer_endpoint,
        "outer_generations": args.outer_generations,
        "concurrency": args.concurrency,
    }


def cmd_search(args) -> int:
    config = _load_config(args.config, _overrides(args))
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    checkpoint_dir = args.checkpoint_dir or os.path.join(out_dir, "checkpoints")
    report_path = os.path.join(out_dir, "report.jsonl")
    if os.path.exists(report_path):
        os.remove(report_path)

    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    search = Search(config, report_path=report_path)
    interrupted = False
    try:
        result = search.run(checkpoint_dir=checkpoint_dir)
    except KeyboardInterrupt:
        log.warning("interrupted; writing checkpoint for generation %d",
                    search.generation)
        search.save_checkpoint(checkpoint_dir)
        interrupted = True
        result = search.result()
    except EvaluationError as exc:
        search.save_checkpoint(checkpoint_dir)
        print(f"error: evaluation failed: {exc}", file=sys.stderr)
        return 1

    artifacts = {"report_log": report_path, "checkpoint_dir": checkpoint_dir}
    result_path = os.path.join(out_dir, "result.json")
    with open(result_path, "w") as fh:
        fh.write(result.to_json() + "\n")
    artifacts["result"] = result_path

    if result.global_best is not None:
        arch, conn, record = result.global_best
        genome_path = os.path.join(out_dir, "best.genome.json")
        with open(genome_path, "w") as fh:
            json.dump({"blocks": [[b.num_layers, b.growth_rate] for b in arch.blocks],
                       "conn_bits": conn.bitstring()}, fh,
                      sort_keys=True, separators=(",", ":"))
            fh.write("\n")
        graph = build_graph(arch, conn, config.input_shape, config.num_classes)
        graph_path = os.path.join(out_dir, "best.graph.json")
        with open(graph_path, "wb") as fh:
            fh.write(export_graph(graph, "canonical-text") + b"\n")
        dot_path = os.path.join(out_dir, "best.dot")
        with open(dot_path, "wb") as fh:
            fh.write(export_graph(graph, "dot"))
        artifacts.update(best_genome=genome_path, best_graph=graph_path,
                         best_dot=dot_path)
        print(f"best fitness {record.fitness:.6f} "
              f"after {result.evaluation_count} evaluations")
    else:
        print("no generations run; no best individual")

    manifest = {
        "tool_version": __version__,
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config": config.to_dict(),
        "artifacts": artifacts,
        "interrupted": interrupted,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 130 if interrupted else 0


def cmd_export(args) -> int:
    try:
        with open(args.checkpoint, "rb") as fh:
            search = Search.resume(fh.read())
    except FileNotFoundError:
        print(f"error: checkpoint not found: {args.checkpoint}", file=sys.stderr)
        return 1
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = search.result()
    if result.global_best is None:
        print("error: checkpoint holds no best individual yet", file=sys.stderr)
        return 1
    arch, conn, _ = result.global_best
    graph = build_graph(arch, conn, search.config.input_shape,
                        search.config.num_classes)
    try:
        blob = export_graph(graph, args.format)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(blob)
    else:
        sys.stdout.buffer.write(blob)
    return 0


def cmd_report(args) -> int:
    try:
        with open(args.log) as fh:
            lines = fh.readlines()
    except FileNotFoundError:
        print(f"error: report log not found: {args.log}", file=sys.stderr)
        return 1
    print(f"{'gen':>4}  {'best':>10}  {'mean':>10}  {'evals':>8}")
    total_evals = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            gen = entry["generation"]
            best = entry["best_fitness"]
            mean = entry["mean_fitness"]
            total_evals = entry["evaluation_count"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            print(f"error: malformed report line {lineno}: {exc}", file=sys.stderr)
            return 1
        print(f"{gen:>4}  {best:>10.6f}  {mean:>10.6f}  {total_evals:>8}")
    print(f"total evaluations: {total_evals}")
    return 0


def cmd_probe_lr(args) -> int:
    config = _load_config(args.config, _overrides(args))
    try:
        with open(args.genome) as fh:
            arch, _ = genome_from_json(fh.read())
        arch.validate(config.ranges)
    except (OSError, GenomeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    evaluator = build_evaluator(config)
    try:
        lr = probe_learning_rate(arch, config.lr_candidates, evaluator,
                                 epochs=config.epochs, seed=config.seed)
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(lr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skipnas",
        description="Evolve CNN block architectures and skip connections.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, help="search seed override")
        p.add_argument("--evaluator", choices=["surrogate", "trainer"])
        p.add_argument("--trainer-endpoint", help="host:port of the trainer")
        p.add_argument("--outer-generations", type=int)
        p.add_argument("--concurrency", type=int)

    p = sub.add_parser("search", help="run a full search")
    common(p)
    p.add_argument("--out", default="skipnas-run", help="artifact directory")
    p.add_argument("--checkpoint-dir", help="checkpoint directory override")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("export", help="export the best network from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--format", default="canonical-text",
                   choices=["canonical-text", "dot"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("report", help="summarize a report log")
    p.add_argument("log")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("probe-lr", help="run only the learning-rate probe")
    common(p)
    p.add_argument("--genome", required=True, help="genome JSON file")
    p.set_defaults(func=cmd_probe_lr)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SKIPNAS_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
