"""skipnas: hybrid PSO/GA search over CNN block architectures and
skip-connection topologies."""

__version__ = "0.1.0"

from .genome import (ArchGenome, BlockGene, ConnGenome, SearchRanges,
                     arch_dimension, conn_segment_length, decode_position,
                     random_arch, random_conn)
from .netgraph import NetworkGraph, build_graph, export_graph, param_count, parse_graph
from .pso import Particle, PsoParams
from .ga import GaParams
from .fitness import (EvalRequest, FitnessRecord, SurrogateEvaluator,
                      TrainerClient, probe_learning_rate)
from .orchestrator import Search, SearchConfig, SearchResult, run_search

__all__ = [
    "ArchGenome", "BlockGene", "ConnGenome", "SearchRanges",
    "arch_dimension", "conn_segment_length", "decode_position",
    "random_arch", "random_conn",
    "NetworkGraph", "build_graph", "export_graph", "param_count", "parse_graph",
    "Particle", "PsoParams", "GaParams",
    "EvalRequest", "FitnessRecord", "SurrogateEvaluator", "TrainerClient",
    "probe_learning_rate",
    "Search", "SearchConfig", "SearchResult", "run_search",
]
