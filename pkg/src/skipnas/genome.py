"""Two-level genome encoding for evolvable block CNNs.

The first level is a decimal vector describing the macro architecture:
dimension 0 is the block count, followed by (layer count, growth rate)
per block.  The second level is a binary vector with one bit per
permitted skip edge inside each block; adjacent edges carry no bit
because they are always present.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass


class GenomeError(ValueError):
    """Raised for malformed genomes or positions."""


def _round_half_away(x: float) -> int:
    if x >= 0:
        return math.floor(x + 0.5)
    return math.ceil(x - 0.5)


def _clamp(v: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, v))


@dataclass(frozen=True)
class SearchRanges:
    """Bounds of the architecture search space."""

    min_blocks: int = 1
    max_blocks: int = 4
    layers_range: tuple[int, int] = (4, 8)
    growth_range: tuple[int, int] = (8, 32)
    input_spatial: tuple[int, int] = (32, 32)
    input_channels: int = 3

    def __post_init__(self):
        if self.min_blocks < 1 or self.min_blocks > self.max_blocks:
            raise GenomeError(
                f"invalid block range [{self.min_blocks}, {self.max_blocks}]")
        for lo, hi in (self.layers_range, self.growth_range):
            if lo > hi or lo < 1:
                raise GenomeError(f"invalid interval [{lo}, {hi}]")
        if min(self.input_spatial) < 2 or self.input_channels < 1:
            raise GenomeError("invalid input shape")
        # each transition halves spatial size; the block count must leave
        # at least 1 pixel after every halving
        limit = math.floor(math.log2(min(self.input_spatial)))
        if self.max_blocks > limit:
            raise GenomeError(
                f"max_blocks {self.max_blocks} exceeds spatial limit {limit}")


@dataclass(frozen=True)
class BlockGene:
    num_layers: int
    growth_rate: int

    def validate(self, ranges: SearchRanges) -> None:
        lo, hi = ranges.layers_range
        if not lo <= self.num_layers <= hi:
            raise GenomeError(f"layer count {self.num_layers} outside [{lo}, {hi}]")
        lo, hi = ranges.growth_range
        if not lo <= self.growth_rate <= hi:
            raise GenomeError(f"growth rate {self.growth_rate} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class ArchGenome:
    """First-level genome: an ordered list of block hyperparameters."""

    blocks: tuple[BlockGene, ...]

    def __post_init__(self):
        if not self.blocks:
            raise GenomeError("architecture needs at least one block")

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def to_vector(self) -> list[float]:
        """Flatten to the first-level decimal vector."""
        vec = [float(len(self.blocks))]
        for b in self.blocks:
            vec.extend((float(b.num_layers), float(b.growth_rate)))
        return vec

    def validate(self, ranges: SearchRanges) -> None:
        if len(self.blocks) > ranges.max_blocks:
            raise GenomeError(f"{len(self.blocks)} blocks exceeds {ranges.max_blocks}")
        for b in self.blocks:
            b.validate(ranges)


@dataclass(frozen=True)
class ConnGenome:
    """Second-level genome: skip-edge presence bits, block by block."""

    bits: tuple[int, ...]
    block_offsets: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise GenomeError("connection bits must be 0/1")
        pos = 0
        for start, length in self.block_offsets:
            if start != pos or length < 0:
                raise GenomeError("block_offsets do not partition the bit vector")
            pos += length
        if pos != len(self.bits):
            raise GenomeError("block_offsets do not cover all bits")

    def __len__(self) -> int:
        return len(self.bits)

    def block_bits(self, block_index: int) -> tuple[int, ...]:
        start, length = self.block_offsets[block_index]
        return self.bits[start:start + length]

    def replace_bits(self, bits) -> "ConnGenome":
        return ConnGenome(tuple(bits), self.block_offsets)

    def bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)


def arch_dimension(num_blocks: int) -> int:
    """Length of the first-level vector for a given block count."""
    if num_blocks < 1:
        raise GenomeError(f"block count must be >= 1, got {num_blocks}")
    return 1 + 2 * num_blocks


def conn_segment_length(num_layers: int) -> int:
    """Number of skip bits for one block of the given depth."""
    if num_layers < 1:
        raise GenomeError(f"layer count must be >= 1, got {num_layers}")
    return num_layers * (num_layers - 1) // 2


def conn_edges(num_layers: int) -> list[tuple[int, int]]:
    """Skip-edge slots (source, target) in bit order for one block.

    Node 0 is the block input, nodes 1..L are the conv units.  A bit
    exists for every pair with target >= source + 2; the direct edge
    (j-1, j) is implicit.
    """
    return [(i, j)
            for i in range(num_layers - 1)
            for j in range(i + 2, num_layers + 1)]


def conn_offsets(arch: ArchGenome) -> tuple[tuple[int, int], ...]:
    offsets = []
    pos = 0
    for b in arch.blocks:
        length = conn_segment_length(b.num_layers)
        offsets.append((pos, length))
        pos += length
    return tuple(offsets)


def random_block(ranges: SearchRanges, rng: random.Random) -> BlockGene:
    return BlockGene(
        num_layers=rng.randint(*ranges.layers_range),
        growth_rate=rng.randint(*ranges.growth_range),
    )


def random_arch(ranges: SearchRanges, rng: random.Random) -> ArchGenome:
    n = rng.randint(ranges.min_blocks, ranges.max_blocks)
    return ArchGenome(tuple(random_block(ranges, rng) for _ in range(n)))


def random_conn(arch: ArchGenome, rng: random.Random) -> ConnGenome:
    offsets = conn_offsets(arch)
    total = sum(length for _, length in offsets)
    bits = tuple(rng.randint(0, 1) for _ in range(total))
    return ConnGenome(bits, offsets)


def empty_conn(arch: ArchGenome) -> ConnGenome:
    """All-zeros connection genome matching ``arch``."""
    offsets = conn_offsets(arch)
    total = sum(length for _, length in offsets)
    return ConnGenome((0,) * total, offsets)


def full_conn(arch: ArchGenome) -> ConnGenome:
    """All-ones connection genome (densely connected baseline)."""
    offsets = conn_offsets(arch)
    total = sum(length for _, length in offsets)
    return ConnGenome((1,) * total, offsets)


def decode_position(position, ranges: SearchRanges) -> ArchGenome:
    """Map a continuous first-level position to a valid architecture.

    Every dimension is rounded half away from zero, then clamped into
    its range.  The block count additionally never exceeds the number
    of (layers, growth) pairs actually present in the vector.
    """
    n = len(position)
    if n < 3 or n % 2 == 0:
        raise GenomeError(f"position length {n} is not of the form 1 + 2*B")
    if any(not math.isfinite(x) for x in position):
        raise GenomeError("position contains non-finite values")
    pairs = (n - 1) // 2
    count = _clamp(_round_half_away(position[0]),
                   ranges.min_blocks, min(ranges.max_blocks, pairs))
    blocks = []
    for i in range(count):
        layers = _clamp(_round_half_away(position[1 + 2 * i]), *ranges.layers_range)
        growth = _clamp(_round_half_away(position[2 + 2 * i]), *ranges.growth_range)
        blocks.append(BlockGene(layers, growth))
    return ArchGenome(tuple(blocks))


def genome_to_dict(arch: ArchGenome, conn: ConnGenome | None = None) -> dict:
    out = {"blocks": [[b.num_layers, b.growth_rate] for b in arch.blocks]}
    if conn is not None:
        out["conn_bits"] = conn.bitstring()
    return out


def genome_to_json(arch: ArchGenome, conn: ConnGenome | None = None) -> str:
    return json.dumps(genome_to_dict(arch, conn), sort_keys=True,
                      separators=(",", ":"))


def genome_from_dict(data: dict) -> tuple[ArchGenome, ConnGenome | None]:
    try:
        blocks = tuple(BlockGene(int(l), int(k)) for l, k in data["blocks"])
    except (KeyError, TypeError, ValueError) as exc:
        raise GenomeError(f"malformed genome object: {exc}") from exc
    arch = ArchGenome(blocks)
    conn = None
    if "conn_bits" in data and data["conn_bits"] is not None:
        bits = data["conn_bits"]
        if not all(c in "01" for c in bits):
            raise GenomeError("conn_bits must be a 0/1 string")
        offsets = conn_offsets(arch)
        total = sum(length for _, length in offsets)
        if len(bits) != total:
            raise GenomeError(
                f"conn_bits length {len(bits)} does not match architecture ({total})")
        conn = ConnGenome(tuple(int(c) for c in bits), offsets)
    return arch, conn


def genome_from_json(text: str) -> tuple[ArchGenome, ConnGenome | None]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GenomeError(f"invalid genome JSON: {exc}") from exc
    return genome_from_dict(data)
