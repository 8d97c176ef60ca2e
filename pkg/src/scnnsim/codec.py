"""Run-length compressed-sparse blocks for weight groups and activation tiles.

Each stored value carries the count of zeros that precede it in the dense
linearization (weights: k-major then r then s; activations: x-major then y).
Runs longer than 2**index_bits - 1 are split by zero-value placeholders, and
trailing zeros are implicit in the logical extent, so decode(encode(x)) == x
for every slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .tensors import ACCUM_MAX, ACCUM_MIN

DEFAULT_INDEX_BITS = 4

WEIGHT_GROUP = "weight-group"
ACTIVATION_TILE = "activation-tile"


class CodecError(ValueError):
    """Malformed compressed block."""


@dataclass(frozen=True)
class CompressedBlock:
    """One weight group (Kc x R x S per input channel) or one activation
    channel tile (Wt x Ht), run-length encoded."""

    values: tuple[int, ...]
    run_lengths: tuple[int, ...]
    logical_extent: int
    index_bits: int = DEFAULT_INDEX_BITS
    granularity: str = ACTIVATION_TILE

    def __post_init__(self) -> None:
        if self.index_bits < 1:
            raise CodecError("index_bits must be >= 1")
        if len(self.values) != len(self.run_lengths):
            raise CodecError("values and run_lengths differ in length")
        max_run = (1 << self.index_bits) - 1
        for run in self.run_lengths:
            if not 0 <= run <= max_run:
                raise CodecError(f"run length {run} outside [0, {max_run}]")
        # blocks carry 16-bit operands or 24-bit pre-requantization outputs;
        # operand-range enforcement happens where data enters the pipeline
        for v in self.values:
            if not ACCUM_MIN <= v <= ACCUM_MAX:
                raise CodecError(f"value {v} outside 24-bit accumulator range")
        if sum(self.run_lengths) + len(self.values) > self.logical_extent:
            raise CodecError(
                f"block expands past its logical extent {self.logical_extent}"
            )

    @property
    def stored_count(self) -> int:
        """Entries held in the buffer, placeholders included."""
        return len(self.values)

    def nnz(self) -> int:
        """True non-zeros (placeholders excluded)."""
        return sum(1 for v in self.values if v != 0)

    def positions(self) -> np.ndarray:
        """Dense coordinate of every stored entry, in stream order."""
        if not self.values:
            return np.empty(0, dtype=np.int64)
        runs = np.asarray(self.run_lengths, dtype=np.int64)
        return np.cumsum(runs + 1) - 1


def encode_block(
    dense_slice: Sequence[int] | np.ndarray,
    index_bits: int = DEFAULT_INDEX_BITS,
    granularity: str = ACTIVATION_TILE,
) -> CompressedBlock:
    """Run-length encode one dense slice (already linearized by the caller)."""
    if index_bits < 1:
        raise CodecError("index_bits must be >= 1")
    flat = np.asarray(dense_slice, dtype=np.int64).reshape(-1)
    max_run = (1 << index_bits) - 1
    values: list[int] = []
    runs: list[int] = []
    zeros = 0
    for v in flat.tolist():
        if v == 0:
            zeros += 1
            continue
        while zeros > max_run:
            values.append(0)  # placeholder occupies one of the zeros
            runs.append(max_run)
            zeros -= max_run + 1
        values.append(v)
        runs.append(zeros)
        zeros = 0
    return CompressedBlock(
        tuple(values), tuple(runs), int(flat.size), index_bits, granularity
    )


def decode_block(block: CompressedBlock) -> np.ndarray:
    """Expand to the dense slice of length logical_extent."""
    dense = np.zeros(block.logical_extent, dtype=np.int64)
    pos = block.positions()
    if pos.size:
        if int(pos[-1]) >= block.logical_extent:
            raise CodecError("block expands past its logical extent")
        dense[pos] = block.values
    return dense


def decode_entries(block: CompressedBlock) -> tuple[np.ndarray, np.ndarray]:
    """(values, dense coordinates) of the stored entries, placeholders
    included, exactly as a buffer fetch would deliver them."""
    pos = block.positions()
    if pos.size and int(pos[-1]) >= block.logical_extent:
        raise CodecError("block expands past its logical extent")
    return np.asarray(block.values, dtype=np.int64), pos


@dataclass(frozen=True)
class FootprintModel:
    """Bits charged per stored value: the value itself plus the per-value
    coordinate overhead the buffers carry."""

    value_bits: int = 16
    index_overhead_bits: int = 10


@dataclass(frozen=True)
class Footprint:
    data_bits: int
    index_bits: int

    @property
    def total_bits(self) -> int:
        return self.data_bits + self.index_bits

    @property
    def total_bytes(self) -> float:
        return self.total_bits / 8


def footprint(
    blocks: CompressedBlock | Iterable[CompressedBlock],
    model: FootprintModel = FootprintModel(),
) -> Footprint:
    """Storage bits for a set of blocks, data and index reported separately."""
    if isinstance(blocks, CompressedBlock):
        blocks = [blocks]
    stored = sum(b.stored_count for b in blocks)
    return Footprint(stored * model.value_bits, stored * model.index_overhead_bits)
