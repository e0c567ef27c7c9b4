"""Fixed-length binary GA over skip-connection genomes.

Tournament selection, single-point crossover, per-bit mutation and
elitism.  All operators are pure given an explicit random source.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .genome import ConnGenome


class GaError(ValueError):
    pass


@dataclass(frozen=True)
class GaParams:
    mutation_rate: float = 0.01
    crossover_rate: float = 0.9
    elitism_rate: float = 0.1
    population_size: int = 20
    generations: int = 10
    tournament_size: int = 2

    def __post_init__(self):
        for name in ("mutation_rate", "crossover_rate", "elitism_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise GaError(f"{name} must lie in [0, 1]")
        if self.population_size < 1 or self.generations < 1 or self.tournament_size < 1:
            raise GaError("population, generations and tournament size must be >= 1")
        if self.elite_count >= self.population_size:
            raise GaError("elite count must be smaller than the population")

    @property
    def elite_count(self) -> int:
        return max(1, round(self.elitism_rate * self.population_size))


def tournament_select(population, fitnesses, tournament_size: int,
                      rng: random.Random):
    """Pick the fittest of ``tournament_size`` uniform draws (with
    replacement); ties go to the lower population index."""
    if not population:
        raise GaError("cannot select from an empty population")
    best = None
    for _ in range(tournament_size):
        i = rng.randrange(len(population))
        if best is None or fitnesses[i] > fitnesses[best] or \
                (fitnesses[i] == fitnesses[best] and i < best):
            best = i
    return population[best]


def one_point_crossover(a: ConnGenome, b: ConnGenome,
                        rng: random.Random) -> tuple[ConnGenome, ConnGenome]:
    """Swap suffixes at a uniform cut point in [1, len-1]."""
    if len(a) != len(b):
        raise GaError(f"length mismatch {len(a)} vs {len(b)}")
    if len(a) < 2:
        return a, b
    cut = rng.randint(1, len(a) - 1)
    child_a = a.bits[:cut] + b.bits[cut:]
    child_b = b.bits[:cut] + a.bits[cut:]
    return a.replace_bits(child_a), b.replace_bits(child_b)


def bit_flip_mutation(g: ConnGenome, mutation_rate: float,
                      rng: random.Random) -> ConnGenome:
    """Flip each bit independently with probability ``mutation_rate``."""
    if mutation_rate <= 0.0:
        return g
    bits = tuple(b ^ 1 if rng.random() < mutation_rate else b for b in g.bits)
    return g.replace_bits(bits)


def evolve_generation(population, fitnesses, params: GaParams,
                      rng: random.Random):
    """Produce the next generation: elites survive unchanged, the rest
    come from tournament selection + crossover + mutation."""
    if len(population) != params.population_size:
        raise GaError("population size does not match params")
    order = sorted(range(len(population)), key=lambda i: (-fitnesses[i], i))
    next_pop = [population[i] for i in order[:params.elite_count]]
    while len(next_pop) < params.population_size:
        p1 = tournament_select(population, fitnesses, params.tournament_size, rng)
        p2 = tournament_select(population, fitnesses, params.tournament_size, rng)
        if rng.random() < params.crossover_rate:
            c1, c2 = one_point_crossover(p1, p2, rng)
        else:
            c1, c2 = p1, p2
        for child in (c1, c2):
            if len(next_pop) < params.population_size:
                next_pop.append(bit_flip_mutation(child, params.mutation_rate, rng))
    return next_pop
