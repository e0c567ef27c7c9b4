import random

import pytest
from hypothesis import given, settings, strategies as st

from skipnas.genome import (ArchGenome, BlockGene, ConnGenome, GenomeError,
                            SearchRanges, arch_dimension, conn_edges,
                            conn_segment_length, decode_position,
                            genome_from_json, genome_to_json, random_arch,
                            random_conn)

RANGES = SearchRanges()


def brute_force_segment(L):
    # one bit per (source, target) with nodes {0..L} and target >= source + 2
    return sum(1 for i in range(L + 1) for j in range(L + 1) if j >= i + 2)


class TestArchDimension:
    @pytest.mark.parametrize("blocks,expected", [(3, 7), (1, 3), (4, 9)])
    def test_examples(self, blocks, expected):
        assert arch_dimension(blocks) == expected

    def test_rejects_zero(self):
        with pytest.raises(GenomeError):
            arch_dimension(0)


class TestConnSegmentLength:
    @pytest.mark.parametrize("L,expected", [(5, 10), (4, 6), (1, 0)])
    def test_examples(self, L, expected):
        assert conn_segment_length(L) == expected

    def test_matches_enumeration(self):
        for L in range(1, 17):
            assert conn_segment_length(L) == brute_force_segment(L)
            assert len(conn_edges(L)) == conn_segment_length(L)

    def test_edge_order_is_source_then_target(self):
        edges = conn_edges(5)
        assert edges == sorted(edges)
        assert edges[0] == (0, 2) and edges[-1] == (3, 5)


class TestRandomArch:
    def test_degenerate_ranges_force_outcome(self):
        r = SearchRanges(min_blocks=2, max_blocks=2, layers_range=(4, 4),
                         growth_range=(8, 8))
        arch = random_arch(r, random.Random(0))
        assert arch.blocks == (BlockGene(4, 8), BlockGene(4, 8))

    def test_deterministic_under_seed(self):
        assert random_arch(RANGES, random.Random(42)) == \
            random_arch(RANGES, random.Random(42))

    def test_sampled_values_in_range(self):
        rng = random.Random(7)
        for _ in range(10_000):
            arch = random_arch(RANGES, rng)
            assert RANGES.min_blocks <= arch.num_blocks <= RANGES.max_blocks
            for b in arch.blocks:
                assert 4 <= b.num_layers <= 8
                assert 8 <= b.growth_rate <= 32


class TestRandomConn:
    def test_single_layer_block_gives_empty_vector(self):
        r = SearchRanges(layers_range=(1, 1))
        arch = ArchGenome((BlockGene(1, 8),))
        assert len(random_conn(arch, random.Random(0))) == 0

    def test_five_layer_block_gives_ten_bits(self):
        arch = ArchGenome((BlockGene(5, 8),))
        assert len(random_conn(arch, random.Random(0))) == 10

    def test_deterministic_under_seed(self):
        arch = random_arch(RANGES, random.Random(3))
        assert random_conn(arch, random.Random(9)).bits == \
            random_conn(arch, random.Random(9)).bits


class TestDecodePosition:
    def test_round_and_clamp(self):
        pos = [3.2, 4.6, 15.9, 5.1, 30.7, 7.7, 9.4]
        arch = decode_position(pos, RANGES)
        assert [(b.num_layers, b.growth_rate) for b in arch.blocks] == \
            [(5, 16), (5, 31), (8, 9)]

    def test_already_integral(self):
        arch = decode_position([2.0, 4.0, 8.0, 4.0, 8.0], RANGES)
        assert [(b.num_layers, b.growth_rate) for b in arch.blocks] == \
            [(4, 8), (4, 8)]

    def test_clamps_to_endpoints(self):
        arch = decode_position([2.0, 99.0, 1.0, 4.0, 8.0], RANGES)
        assert [(b.num_layers, b.growth_rate) for b in arch.blocks] == \
            [(8, 8), (4, 8)]

    def test_rejects_bad_dimension_count(self):
        for pos in ([], [1.0], [1.0, 4.0], [1.0, 4.0, 8.0, 5.0]):
            with pytest.raises(GenomeError):
                decode_position(pos, RANGES)

    def test_rejects_non_finite(self):
        with pytest.raises(GenomeError):
            decode_position([1.0, float("nan"), 8.0], RANGES)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, seed):
        arch = random_arch(RANGES, random.Random(seed))
        assert decode_position(arch.to_vector(), RANGES) == arch

    @given(st.integers(1, 5),
           st.lists(st.floats(-1e6, 1e6), min_size=0, max_size=0),
           st.data())
    @settings(max_examples=200, deadline=None)
    def test_output_always_valid(self, blocks, _, data):
        pos = data.draw(st.lists(st.floats(-1e6, 1e6),
                                 min_size=1 + 2 * blocks,
                                 max_size=1 + 2 * blocks))
        arch = decode_position(pos, RANGES)
        arch.validate(RANGES)


class TestSerialization:
    def test_round_trip(self):
        rng = random.Random(11)
        for _ in range(50):
            arch = random_arch(RANGES, rng)
            conn = random_conn(arch, rng)
            arch2, conn2 = genome_from_json(genome_to_json(arch, conn))
            assert arch2 == arch and conn2 == conn

    def test_bit_order_is_blockwise(self):
        arch = ArchGenome((BlockGene(4, 8), BlockGene(5, 8)))
        conn = random_conn(arch, random.Random(1))
        text = genome_to_json(arch, conn)
        _, parsed = genome_from_json(text)
        assert parsed.block_bits(0) == conn.bits[:6]
        assert parsed.block_bits(1) == conn.bits[6:]

    def test_rejects_mismatched_bits(self):
        with pytest.raises(GenomeError):
            genome_from_json('{"blocks": [[4, 8]], "conn_bits": "01"}')

    def test_rejects_garbage(self):
        with pytest.raises(GenomeError):
            genome_from_json("not json")
        with pytest.raises(GenomeError):
            genome_from_json('{"no_blocks": 1}')


class TestSearchRanges:
    def test_rejects_inverted_block_range(self):
        with pytest.raises(GenomeError):
            SearchRanges(min_blocks=3, max_blocks=2)

    def test_rejects_spatially_infeasible_max_blocks(self):
        with pytest.raises(GenomeError):
            SearchRanges(max_blocks=6, input_spatial=(32, 32))

    def test_conn_genome_rejects_bad_offsets(self):
        with pytest.raises(GenomeError):
            ConnGenome((0, 1), ((0, 1),))
