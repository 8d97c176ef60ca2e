import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_rle_decode
from scnnsim.codec import (
    CodecError,
    CompressedBlock,
    FootprintModel,
    decode_block,
    decode_entries,
    encode_block,
    footprint,
)


class TestEncode:
    def test_basic(self):
        b = encode_block([1, 0, 0, 2])
        assert b.values == (1, 2)
        assert b.run_lengths == (0, 2)

    def test_all_zero_is_empty(self):
        b = encode_block([0] * 8)
        assert b.values == ()
        assert b.run_lengths == ()
        assert b.logical_extent == 8

    def test_long_run_split_with_placeholder(self):
        # 20 zeros then 7: a zero placeholder absorbs the 16th zero
        b = encode_block([0] * 20 + [7], index_bits=4)
        assert b.values == (0, 7)
        assert b.run_lengths == (15, 4)
        assert decode_block(b).tolist() == [0] * 20 + [7]

    def test_two_placeholders(self):
        b = encode_block([0] * 40 + [3], index_bits=4)
        assert b.values == (0, 0, 3)
        assert b.run_lengths == (15, 15, 8)
        assert decode_block(b).tolist() == [0] * 40 + [3]

    def test_trailing_zeros_implicit(self):
        b = encode_block([0, 5] + [0] * 100)
        assert b.values == (5,)
        assert b.run_lengths == (1,)
        assert b.logical_extent == 102

    def test_nnz_excludes_placeholders(self):
        b = encode_block([0] * 20 + [7])
        assert b.stored_count == 2
        assert b.nnz() == 1


class TestDecode:
    def test_basic(self):
        b = CompressedBlock((1, 2), (0, 2), 4)
        assert decode_block(b).tolist() == [1, 0, 0, 2]

    def test_empty_block(self):
        assert decode_block(CompressedBlock((), (), 3)).tolist() == [0, 0, 0]

    def test_entries_expose_coordinates(self):
        b = encode_block([0, 9, 0, 0, 4])
        vals, pos = decode_entries(b)
        assert vals.tolist() == [9, 4]
        assert pos.tolist() == [1, 4]

    def test_overlong_block_rejected(self):
        with pytest.raises(CodecError):
            decode_block(CompressedBlock((1, 1), (3, 3), 4))

    def test_run_length_over_width_rejected(self):
        with pytest.raises(CodecError):
            CompressedBlock((1,), (16,), 20, index_bits=4)


class TestRoundTrip:
    @pytest.mark.parametrize("seed", range(8))
    @pytest.mark.parametrize("density", [0.0, 0.05, 0.3, 1.0])
    def test_random_slices(self, seed, density):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 200))
        dense = np.where(
            rng.random(n) < density, rng.integers(-999, 1000, n), 0
        )
        b = encode_block(dense)
        assert decode_block(b).tolist() == dense.tolist()
        # stored non-placeholder count preserves the slice's non-zero count
        assert b.nnz() == int(np.count_nonzero(dense))

    def test_bulk_random_slices(self):
        # volume pass: ten thousand slices incl. >15-zero runs
        rng = np.random.default_rng(1234)
        for _ in range(10_000):
            n = int(rng.integers(1, 64))
            dense = np.where(rng.random(n) < 0.15, rng.integers(1, 100, n), 0)
            b = encode_block(dense)
            assert decode_block(b).tolist() == dense.tolist()

    @given(st.lists(st.integers(-100, 100), min_size=0, max_size=80))
    @settings(max_examples=300)
    def test_property_round_trip(self, xs):
        b = encode_block(xs)
        assert decode_block(b).tolist() == list(xs)
        assert decode_block(b).tolist() == naive_rle_decode(
            b.values, b.run_lengths, b.logical_extent
        )

    @given(st.integers(1, 64), st.integers(1, 6))
    def test_placeholders_only_for_long_runs(self, n_zeros, index_bits):
        dense = [0] * n_zeros + [5]
        b = encode_block(dense, index_bits=index_bits)
        placeholders = sum(1 for v in b.values if v == 0)
        assert placeholders == n_zeros // (1 << index_bits)


class TestFootprint:
    def test_single_value_default_model(self):
        b = encode_block([0, 0, 42])
        fp = footprint(b)
        assert fp.data_bits == 16
        assert fp.index_bits == 10
        assert fp.total_bits == 26

    def test_empty_block_zero_bits(self):
        assert footprint(encode_block([0, 0, 0])).total_bits == 0

    def test_index_to_data_ratio(self):
        # the shipped overhead model stores 10 index bits per 16 data bits
        rng = np.random.default_rng(0)
        blocks = [
            encode_block(np.where(rng.random(64) < 0.4, rng.integers(1, 50, 64), 0))
            for _ in range(32)
        ]
        fp = footprint(blocks)
        assert fp.data_bits > 0
        assert fp.index_bits / fp.data_bits == pytest.approx(10 / 16)

    def test_monotone_in_nonzero_count(self):
        dense = np.zeros(64, dtype=int)
        last = 0
        for i in range(0, 64, 8):
            dense[i] = 7
            fp = footprint(encode_block(dense)).total_bits
            assert fp >= last
            last = fp

    def test_custom_model(self):
        fp = footprint(encode_block([1, 2, 3]), FootprintModel(16, 4))
        assert (fp.data_bits, fp.index_bits) == (48, 12)
