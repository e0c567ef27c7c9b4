"""Variable-length particle swarm over architecture positions.

Velocity and position updates follow the canonical inertia-weight form
v' = w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x); x' = x + v'.  Updates
apply only to dimensions belonging to blocks matched by index between
the particle and the best positions (block index determines the spatial
size, so equal indices mean comparable blocks).  The block-count
dimension is handled separately with a stochastic gate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .genome import (ArchGenome, ConnGenome, SearchRanges, _clamp,
                     _round_half_away, random_block)


class PsoError(ValueError):
    pass


@dataclass(frozen=True)
class PsoParams:
    w: float = 0.7298
    c1: float = 1.49618
    c2: float = 1.49618
    r_cb: float = 0.3

    def __post_init__(self):
        for name in ("w", "c1", "c2"):
            v = getattr(self, name)
            if not (v >= 0 and v == v):
                raise PsoError(f"{name} must be finite and nonnegative")
        if not 0.0 <= self.r_cb <= 1.0:
            raise PsoError("r_cb must lie in [0, 1]")


@dataclass(frozen=True)
class Particle:
    position: tuple[float, ...]
    velocity: tuple[float, ...]
    best_position: tuple[float, ...] | None = None
    best_fitness: float | None = None
    best_conn: ConnGenome | None = None

    def __post_init__(self):
        if len(self.position) != len(self.velocity):
            raise PsoError("position/velocity dimensionality mismatch")

    @property
    def num_blocks(self) -> int:
        return (len(self.position) - 1) // 2

    def record_best(self, fitness: float, conn: ConnGenome) -> "Particle":
        """Update the personal best if ``fitness`` strictly improves it."""
        if self.best_fitness is not None and fitness <= self.best_fitness:
            return self
        return replace(self, best_position=self.position,
                       best_fitness=fitness, best_conn=conn)


def from_arch(arch: ArchGenome) -> Particle:
    """Particle at an architecture's position, with zero velocity."""
    pos = tuple(arch.to_vector())
    return Particle(pos, (0.0,) * len(pos))


def match_blocks(particle: Particle, best_position) -> list[tuple[int, int]]:
    """Pair comparable blocks of the particle and a best position.

    Blocks at the same index share the same spatial size (every
    transition halves it), so matching is a prefix zip.
    """
    b_best = (len(best_position) - 1) // 2
    return [(i, i) for i in range(min(particle.num_blocks, b_best))]


def _step(x: float, v: float, pb: float, gb: float,
          params: PsoParams, rng: random.Random) -> tuple[float, float]:
    r1, r2 = rng.random(), rng.random()
    v_new = (params.w * v
             + params.c1 * r1 * (pb - x)
             + params.c2 * r2 * (gb - x))
    return x + v_new, v_new


def update_particle(p: Particle, gbest, params: PsoParams,
                    rng: random.Random) -> Particle:
    """Apply the velocity/position update to all matched-block dimensions.

    Dimension 0 and dimensions of unmatched blocks are left untouched;
    positions are never clamped here (ranges are enforced at decode).
    """
    pbest = p.best_position if p.best_position is not None else p.position
    matched = min(len(match_blocks(p, gbest)), (len(pbest) - 1) // 2)
    pos, vel = list(p.position), list(p.velocity)
    for i in range(matched):
        for d in (1 + 2 * i, 2 + 2 * i):
            pos[d], vel[d] = _step(pos[d], vel[d], pbest[d], gbest[d], params, rng)
    return replace(p, position=tuple(pos), velocity=tuple(vel))


def change_block_count(p: Particle, gbest, params: PsoParams,
                       ranges: SearchRanges, rng: random.Random) -> Particle:
    """Stochastically update the block-count dimension and resize.

    With probability r_cb the block-count dimension gets a PSO update;
    grown blocks are generated uniformly at random with zero velocity,
    shrunk blocks are cut from the tail.  The personal best survives
    untouched.
    """
    if rng.random() >= params.r_cb:
        return p
    pbest = p.best_position if p.best_position is not None else p.position
    pos, vel = list(p.position), list(p.velocity)
    pos[0], vel[0] = _step(pos[0], vel[0], pbest[0], gbest[0], params, rng)
    target = _clamp(_round_half_away(pos[0]), ranges.min_blocks, ranges.max_blocks)
    current = p.num_blocks
    if target > current:
        for _ in range(target - current):
            b = random_block(ranges, rng)
            pos.extend((float(b.num_layers), float(b.growth_rate)))
            vel.extend((0.0, 0.0))
    elif target < current:
        keep = 1 + 2 * target
        pos, vel = pos[:keep], vel[:keep]
    return replace(p, position=tuple(pos), velocity=tuple(vel))
