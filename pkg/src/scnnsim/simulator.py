"""Cycle-level functional simulation of the sparse PE array plus the dense
baseline cycle models.

The sparse pipeline is simulated exactly: compressed operands are fetched in
vectors of F weights x I activations, every operand pair is multiplied, and
each product is scattered to a banked accumulator addressed by its output
coordinate. Cycle accounting is per (PE, output-channel group): the base cost
is the number of F x I vector batches, accumulator contention adds stalls
when the hottest bank's total demand exceeds the batch count (banks retire
one product per cycle; elastic queues absorb transient imbalance within a
group), and a global barrier at each group boundary charges every PE the
time of the slowest one.

Functional equivalence is the master contract: the decoded, halo-merged,
ReLU'd (and optionally pooled) outputs equal the exact reference convolution
bit for bit.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np

from . import codec
from .analytic import (
    DCNN_AREA,
    SCNN_AREA,
    AreaTable,
    EnergyModel,
    EventCounts,
    count_events,
)
from .codec import (
    ACTIVATION_TILE,
    WEIGHT_GROUP,
    CompressedBlock,
    Footprint,
    FootprintModel,
)
from .dataflow import (
    ConfigurationError,
    GroupPlan,
    TilePlan,
    choose_kc,
    partition_tiles,
)
from .tensors import (
    ACCUM_MAX,
    ACCUM_MIN,
    DenseTensor,
    FixedPointOverflow,
    LayerShape,
    OUT_ROLES,
    check_operand_range,
)

VARIANT_SCNN = "scnn"
VARIANT_DCNN = "dcnn"
VARIANT_DCNN_OPT = "dcnn-opt"


@dataclass(frozen=True)
class PoolSpec:
    """Max pooling applied by the post-processing unit after ReLU.

    Output sizing is ceil-mode: partial windows at the far edge produce an
    output, matching the pooling conventions of the shipped networks."""

    window: int
    stride: int

    def out_extent(self, span: int) -> int:
        if span < 1:
            return 0
        return max(1, -((-(span - self.window)) // self.stride) + 1)


@dataclass(frozen=True)
class ArchConfig:
    """Hardware knobs for the sparse accelerator and its dense baselines."""

    pe_rows: int = 8
    pe_cols: int = 8
    weights_per_fetch: int = 4   # weight vector width per cycle
    acts_per_fetch: int = 4      # activation vector width per cycle
    accum_banks: int = 32
    bank_entries: int = 32
    iaram_bytes: int = 10 * 1024
    oaram_bytes: int = 10 * 1024
    weight_fifo_entries: int = 50  # F-wide vectors resident per PE
    accum_double_buffered: bool = True
    dram_values_per_cycle: float = 16.0  # 16-bit value units per cycle
    ppu_values_per_cycle: int = 16
    halo_latency_cycles: int = 0
    act_ram_port_bits: int = 104  # per-PE activation RAM bits per cycle
    index_bits: int = 4
    bank_map: str = "mod"  # or "xor": fold the linear coordinate before mod
    energy: EnergyModel = field(default_factory=EnergyModel)
    scnn_area: AreaTable = SCNN_AREA
    dcnn_area: AreaTable = DCNN_AREA

    def __post_init__(self) -> None:
        for attr in (
            "pe_rows", "pe_cols", "weights_per_fetch", "acts_per_fetch",
            "accum_banks", "bank_entries", "iaram_bytes", "oaram_bytes",
            "weight_fifo_entries", "ppu_values_per_cycle", "act_ram_port_bits",
        ):
            if getattr(self, attr) < 1:
                raise ConfigurationError(f"{attr} must be >= 1")
        if self.halo_latency_cycles < 0 or self.dram_values_per_cycle <= 0:
            raise ConfigurationError("bandwidth/latency knobs must be positive")
        if self.bank_map not in ("mod", "xor"):
            raise ConfigurationError(f"unknown bank_map {self.bank_map}")
        if self.accum_banks < self.weights_per_fetch * self.acts_per_fetch:
            warnings.warn(
                "accumulator banks fewer than multiplier products per cycle; "
                "expect heavy contention",
                stacklevel=2,
            )

    @property
    def n_pes(self) -> int:
        return self.pe_rows * self.pe_cols

    @property
    def mults_per_pe(self) -> int:
        return self.weights_per_fetch * self.acts_per_fetch

    @property
    def total_mults(self) -> int:
        return self.n_pes * self.mults_per_pe

    @property
    def iaram_value_capacity(self) -> int:
        return self.iaram_bytes * 8 // 16

    @property
    def oaram_value_capacity(self) -> int:
        return self.oaram_bytes * 8 // 16


def dcnn_arch(base: ArchConfig) -> ArchConfig:
    """Dense baseline provisioning: same multiplier budget, 2MB of plain
    activation SRAM instead of 1MB of compressed RAM."""
    per_ram = 2 * 1024 * 1024 // (2 * base.n_pes)
    return replace(base, iaram_bytes=per_ram, oaram_bytes=per_ram)


@dataclass
class PEState:
    """Mutable per-PE simulation state. The input and output activation RAMs
    hold compressed blocks; the accumulator is dense for the current group."""

    pe: int
    iaram: dict[int, CompressedBlock] = field(default_factory=dict)
    oaram: dict[int, CompressedBlock] = field(default_factory=dict)
    acc: np.ndarray | None = None
    current_group: int = -1


@dataclass(frozen=True)
class SimReport:
    """Per-layer outcome of one variant run.

    busy counts multiply batches plus bank-conflict stalls; every other
    PE-cycle (barrier skew, FIFO refill, unhidden drain) is wait, so
    busy + wait sums to n_pes * cycles exactly.
    """

    layer: str
    variant: str
    cycles: int
    useful_mults: int
    mult_utilization: float
    barrier_stall_fraction: float
    bank_conflict_stalls: int
    fifo_stalls: int
    drain_overhead_cycles: int
    stride_skipped: int
    batches: int
    events: EventCounts
    energy: float
    energy_breakdown: dict[str, float]
    iaram_footprint: Footprint
    oaram_footprint: Footprint
    dram_tiled: bool
    pe_busy: tuple[int, ...]
    pe_wait: tuple[int, ...]
    kc: int = 0
    n_groups: int = 1
    oracle_checked: bool = False
    tiling_energy_fraction: float = 0.0


@dataclass(frozen=True)
class WeightStream:
    """Broadcast weight blocks, one per (output-channel group, input channel),
    linearized k-major then r then s over the group's eligible filters."""

    layer: LayerShape
    gplan: GroupPlan
    blocks: dict[tuple[int, int], CompressedBlock]
    k_offset: dict[tuple[int, int], int]  # first eligible k within the group

    def block(self, group_index: int, channel: int) -> CompressedBlock | None:
        return self.blocks.get((group_index, channel))

    def stored_values(self, group_index: int | None = None) -> int:
        return sum(
            b.stored_count
            for (gi, _), b in self.blocks.items()
            if group_index is None or gi == group_index
        )


def compress_weights(
    layer: LayerShape, gplan: GroupPlan, weights: DenseTensor, index_bits: int = 4
) -> WeightStream:
    """Encode pruned weights per (group, channel) for broadcast to the PEs."""
    check_operand_range(weights, "weight")
    blocks: dict[tuple[int, int], CompressedBlock] = {}
    offsets: dict[tuple[int, int], int] = {}
    kpg = layer.filters_per_group
    cpg = layer.channels_per_group
    for gi, grp in enumerate(gplan.groups):
        for c in range(layer.C):
            gg = c // cpg
            k_lo = max(grp.start, gg * kpg)
            k_hi = min(grp.stop, (gg + 1) * kpg)
            if k_lo >= k_hi:
                continue
            dense = weights.values[k_lo:k_hi, c % cpg].reshape(-1)
            blocks[(gi, c)] = codec.encode_block(dense, index_bits, WEIGHT_GROUP)
            offsets[(gi, c)] = k_lo - grp.start
    return WeightStream(layer, gplan, blocks, offsets)


def distribute_activations(
    plan: TilePlan, acts: DenseTensor, index_bits: int = 4
) -> list[dict[int, CompressedBlock]]:
    """Per-PE compressed channel tiles (x-major then y within the tile)."""
    check_operand_range(acts, "activation")
    if acts.shape != plan.layer.input_shape():
        raise ConfigurationError(
            f"activations {acts.shape} do not match layer {plan.layer.input_shape()}"
        )
    if acts.size and int(acts.values.min()) < 0:
        raise ConfigurationError("input activations must be non-negative (post ReLU)")
    out = []
    for pe in range(plan.n_pes):
        t = plan.tile(pe)
        tiles: dict[int, CompressedBlock] = {}
        if not t.empty:
            for c in range(plan.layer.C):
                dense = acts.values[c, t.x0 : t.x0 + t.wt, t.y0 : t.y0 + t.ht]
                tiles[c] = codec.encode_block(
                    dense.reshape(-1), index_bits, ACTIVATION_TILE
                )
        out.append(tiles)
    return out


def prepare_scnn_inputs(
    arch: ArchConfig, layer: LayerShape, weights: DenseTensor, acts: DenseTensor
) -> tuple[WeightStream, list[dict[int, CompressedBlock]]]:
    """Plan the layer and compress/distribute dense operands for the array."""
    plan = partition_tiles(layer, (arch.pe_rows, arch.pe_cols))
    gplan = choose_kc(layer, arch)
    stream = compress_weights(layer, gplan, weights, arch.index_bits)
    tiles = distribute_activations(plan, acts, arch.index_bits)
    return stream, tiles


def route_batch(products: Iterable[tuple[int, int]]) -> int:
    """Stall cycles one batch of (bank_id, value) products adds in isolation.

    The batch completes in max(1, max products on one bank) cycles since each
    bank accepts one product per cycle; the stall is that minus one.
    """
    counts = Counter(bank for bank, _ in products)
    worst = max(counts.values(), default=0)
    return max(1, worst) - 1


def _bank_ids(linear: np.ndarray, banks: int, bank_map: str) -> np.ndarray:
    if bank_map == "xor":
        return ((linear >> 5) ^ linear) % banks
    return linear % banks


@dataclass(frozen=True)
class PPUResult:
    blocks: list[dict[int, CompressedBlock]]  # per PE: out channel -> block
    plane: np.ndarray                         # merged post-ReLU/pool [kc, Wp, Hp]
    drained_cells: int
    halo_values: int


def _merge_group_plane(
    accs: Sequence[np.ndarray | None], plan: TilePlan, kc: int
) -> tuple[np.ndarray, int]:
    """Sum every PE's live accumulator cells at their global coordinates.

    Cells whose output coordinate falls outside the plane are dropped; the
    non-zero cells outside a PE's owned rectangle are the halo traffic."""
    layer = plan.layer
    full = np.zeros((kc, layer.Wo, layer.Ho), dtype=np.int64)
    halo_values = 0
    for pe in range(plan.n_pes):
        acc = accs[pe]
        if acc is None:
            continue
        xb, yb = plan.acc_base(pe)
        ex, ey = plan.acc_extent(pe)
        xl, xh = max(0, -xb), min(ex, layer.Wo - xb)
        yl, yh = max(0, -yb), min(ey, layer.Ho - yb)
        if xl >= xh or yl >= yh:
            continue
        window = acc[:, xl:xh, yl:yh]
        full[:, xb + xl : xb + xh, yb + yl : yb + yh] += window
        (oxl, oxh), (oyl, oyh) = plan.owned_out_range(pe)
        own = window[
            :,
            max(oxl - xb - xl, 0) : max(oxh - xb - xl, 0),
            max(oyl - yb - yl, 0) : max(oyh - yb - yl, 0),
        ]
        halo_values += int(np.count_nonzero(window)) - int(np.count_nonzero(own))
    return full, halo_values


def _check_accum(plane: np.ndarray, layer_name: str) -> None:
    if plane.size == 0:
        return
    lo, hi = int(plane.min()), int(plane.max())
    if lo < ACCUM_MIN or hi > ACCUM_MAX:
        raise FixedPointOverflow(
            f"{layer_name}: merged partial sums [{lo}, {hi}] exceed 24-bit range"
        )


def max_pool(plane: np.ndarray, pool: PoolSpec) -> np.ndarray:
    """Ceil-mode max pooling over the two trailing axes of [k, W, H]."""
    k, w, h = plane.shape
    wo, ho = pool.out_extent(w), pool.out_extent(h)
    out = np.empty((k, wo, ho), dtype=plane.dtype)
    for i in range(wo):
        for j in range(ho):
            xs = slice(i * pool.stride, min(i * pool.stride + pool.window, w))
            ys = slice(j * pool.stride, min(j * pool.stride + pool.window, h))
            out[:, i, j] = plane[:, xs, ys].max(axis=(1, 2))
    return out


def plane_partition(span: int, parts: int) -> list[tuple[int, int]]:
    """Even split of an output plane axis, last parts ragged or empty."""
    width = -((-span) // parts)
    return [(min(p * width, span), min((p + 1) * width, span)) for p in range(parts)]


def ppu_finalize(
    pe_accumulators: Sequence[np.ndarray | None],
    tile_plan: TilePlan,
    group: range,
    pool: PoolSpec | None = None,
    index_bits: int = 4,
) -> PPUResult:
    """Group-boundary post-processing across the PE array.

    Halo cells are added into their owners' partial sums, the merged plane is
    ReLU'd (and max-pooled when requested), and each PE compresses its slice
    of the result for its output RAM.
    """
    layer = tile_plan.layer
    merged, halo_values = _merge_group_plane(pe_accumulators, tile_plan, len(group))
    _check_accum(merged, layer.name)
    plane = np.maximum(merged, 0)
    if pool is not None:
        plane = max_pool(plane, pool)
    xr = plane_partition(plane.shape[1], tile_plan.pe_cols)
    yr = plane_partition(plane.shape[2], tile_plan.pe_rows)
    drained = 0
    blocks: list[dict[int, CompressedBlock]] = []
    for pe in range(tile_plan.n_pes):
        acc = pe_accumulators[pe]
        if acc is not None:
            drained += acc.size
        xlo, xhi = xr[pe % tile_plan.pe_cols]
        ylo, yhi = yr[pe // tile_plan.pe_cols]
        mine: dict[int, CompressedBlock] = {}
        if xhi > xlo and yhi > ylo:
            for ki, k in enumerate(group):
                dense = plane[ki, xlo:xhi, ylo:yhi].reshape(-1)
                mine[k] = codec.encode_block(dense, index_bits, ACTIVATION_TILE)
        blocks.append(mine)
    return PPUResult(blocks, plane, drained, halo_values)


@dataclass(frozen=True)
class LayerOutput:
    """Compressed per-PE outputs plus the assembled dense plane (post ReLU
    and pooling). `dense` is what the simulator merged internally; `decoded`
    rebuilds the same plane strictly from the compressed blocks."""

    blocks: list[dict[int, CompressedBlock]]
    dense: DenseTensor
    pe_rows: int
    pe_cols: int

    def decoded(self) -> DenseTensor:
        k_total, w, h = self.dense.shape
        xr = plane_partition(w, self.pe_cols)
        yr = plane_partition(h, self.pe_rows)
        out = np.zeros((k_total, w, h), dtype=np.int64)
        for pe, per_k in enumerate(self.blocks):
            xlo, xhi = xr[pe % self.pe_cols]
            ylo, yhi = yr[pe // self.pe_cols]
            for k, block in per_k.items():
                tile = codec.decode_block(block).reshape(xhi - xlo, yhi - ylo)
                out[k, xlo:xhi, ylo:yhi] = tile
        return DenseTensor(out, OUT_ROLES)


def simulate_scnn_layer(
    arch: ArchConfig,
    layer: LayerShape,
    weights: WeightStream,
    act_tiles: list[dict[int, CompressedBlock]],
    pool: PoolSpec | None = None,
    input_from_dram: bool = True,
    output_to_dram: bool = False,
    trace: IO | None = None,
) -> tuple[LayerOutput, SimReport]:
    """Run one layer through the sparse PE array.

    Activations must already be distributed per the layer's tile plan and the
    weights broadcast (same stream for every PE). Returns the compressed
    per-PE outputs and the cycle/energy report.
    """
    plan = partition_tiles(layer, (arch.pe_rows, arch.pe_cols))
    gplan = weights.gplan
    n_pes = arch.n_pes
    if len(act_tiles) != n_pes:
        raise ConfigurationError(f"expected {n_pes} activation tile sets")
    F, I = arch.weights_per_fetch, arch.acts_per_fetch
    banks = arch.accum_banks
    fm = FootprintModel()
    coded_bits = fm.value_bits + fm.index_overhead_bits

    states = [PEState(pe, iaram=dict(act_tiles[pe])) for pe in range(n_pes)]
    ev = EventCounts()

    # decode activation entries once per (pe, channel); reused across groups
    act_entries: list[dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]] = []
    iaram_stored = 0
    for pe in range(n_pes):
        t = plan.tile(pe)
        per_c: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        for c, block in states[pe].iaram.items():
            if t.empty:
                continue
            if block.logical_extent != t.wt * t.ht:
                raise ConfigurationError(
                    f"pe {pe} channel {c}: block extent {block.logical_extent} "
                    f"does not match tile {t.wt}x{t.ht}"
                )
            iaram_stored += block.stored_count
            vals, pos = codec.decode_entries(block)
            if vals.size == 0:
                continue
            per_c[c] = (vals, t.x0 + pos // t.ht, t.y0 + pos % t.ht)
        act_entries.append(per_c)

    # weight entries per (group, channel), shared by all PEs
    w_entries: dict[tuple[int, int], tuple] = {}
    rs = layer.R * layer.S
    for (gi, c), block in weights.blocks.items():
        vals, pos = codec.decode_entries(block)
        if vals.size == 0:
            continue
        k_in_group = weights.k_offset[(gi, c)] + pos // rs
        w_entries[(gi, c)] = (vals, k_in_group, (pos % rs) // layer.S, pos % layer.S)

    total_cycles = 0
    conflict_stalls_total = 0
    fifo_stalls_total = 0
    drain_overhead_total = 0
    stride_skipped = 0
    batches_total = 0
    useful = 0
    out_planes: list[np.ndarray] = []
    out_blocks: list[dict[int, CompressedBlock]] = [dict() for _ in range(n_pes)]
    pe_busy = np.zeros(n_pes, dtype=np.int64)
    pe_wait = np.zeros(n_pes, dtype=np.int64)

    for gi, group in enumerate(gplan.groups):
        kc = len(group)
        group_busy = np.zeros(n_pes, dtype=np.int64)
        group_batches = np.zeros(n_pes, dtype=np.int64)
        max_va: dict[int, int] = {}
        for pe in range(n_pes):
            st = states[pe]
            st.current_group = gi
            t = plan.tile(pe)
            if t.empty:
                st.acc = None
                continue
            ex, ey = plan.acc_extent(pe)
            if kc * ex * ey > gplan.capacity_entries:
                raise ConfigurationError(
                    f"group of {kc} channels overflows the accumulator "
                    f"({kc * ex * ey} > {gplan.capacity_entries} entries)"
                )
            xb, yb = plan.acc_base(pe)
            acc = np.zeros((kc, ex, ey), dtype=np.int64)
            st.acc = acc
            bank_totals = np.zeros(banks, dtype=np.int64)
            batches = 0
            for c, (avals, xs, ys) in act_entries[pe].items():
                na = avals.size
                va = -((-na) // I)
                if va > max_va.get(c, 0):
                    max_va[c] = va
                entry = w_entries.get((gi, c))
                if entry is None:
                    continue
                wvals, wk, wr, ws = entry
                nw = wvals.size
                batches += (-((-nw) // F)) * va
                ev.mult_ops += nw * na
                useful += int(np.count_nonzero(wvals)) * int(np.count_nonzero(avals))
                xo_num = xs[None, :] - wr[:, None] + layer.pad
                yo_num = ys[None, :] - ws[:, None] + layer.pad
                prods = wvals[:, None] * avals[None, :]
                karr = np.broadcast_to(wk[:, None], prods.shape)
                if layer.stride == 1:
                    xa = (xo_num - xb).reshape(-1)
                    ya = (yo_num - yb).reshape(-1)
                    kf = karr.reshape(-1)
                    pf = prods.reshape(-1)
                else:
                    valid = (xo_num % layer.stride == 0) & (yo_num % layer.stride == 0)
                    stride_skipped += int(valid.size - np.count_nonzero(valid))
                    sel = valid.reshape(-1)
                    xa = (xo_num // layer.stride - xb).reshape(-1)[sel]
                    ya = (yo_num // layer.stride - yb).reshape(-1)[sel]
                    kf = karr.reshape(-1)[sel]
                    pf = prods.reshape(-1)[sel]
                np.add.at(acc, (kf, xa, ya), pf)
                lin = (kf * ex + xa) * ey + ya
                bank_totals += np.bincount(
                    _bank_ids(lin, banks, arch.bank_map), minlength=banks
                )
            routed = int(bank_totals.sum())
            ev.xbar_transfers += routed
            ev.acc_updates += routed
            # banks retire one product per cycle; within a group the elastic
            # queues hide anything short of sustained single-bank overload
            stall = max(0, int(bank_totals.max()) - batches) if batches else 0
            conflict_stalls_total += stall
            group_busy[pe] = batches + stall
            group_batches[pe] = batches
        batches_total += int(group_batches.sum())

        compute_t = int(group_busy.max())
        # weight FIFO refill: DRAM streams the group's broadcast weights in
        # parallel with compute; channels whose working set spills the FIFO
        # are re-streamed once per activation-vector pass
        stream_values = 0.0
        for c in range(layer.C):
            blk = weights.block(gi, c)
            if blk is None or blk.stored_count == 0:
                continue
            vw = -((-blk.stored_count) // F)
            passes = 1 if vw <= arch.weight_fifo_entries else max_va.get(c, 1)
            stream_values += blk.stored_count * passes
        stream_cycles = math.ceil(
            stream_values * coded_bits / 16 / arch.dram_values_per_cycle
        )
        t_eff = max(compute_t, stream_cycles)
        fifo_stalls_total += t_eff - compute_t

        ppu = ppu_finalize(
            [st.acc for st in states], plan, group, pool, arch.index_bits
        )
        out_planes.append(ppu.plane)
        for pe in range(n_pes):
            for k, block in ppu.blocks[pe].items():
                out_blocks[pe][k] = block
                states[pe].oaram[k] = block
        ev.acc_drains += ppu.drained_cells
        drain_cycles = math.ceil(
            max(st.acc.size if st.acc is not None else 0 for st in states)
            / arch.ppu_values_per_cycle
        )
        if arch.accum_double_buffered and gplan.double_buffered:
            group_cycles = max(t_eff, drain_cycles)
            drain_overhead_total += max(0, drain_cycles - t_eff)
        else:
            group_cycles = t_eff + drain_cycles
            drain_overhead_total += drain_cycles
        group_cycles += arch.halo_latency_cycles
        total_cycles += group_cycles
        pe_busy += group_busy
        pe_wait += group_cycles - group_busy
        for st in states:
            st.acc = None  # drained and cleared
        if trace is not None:
            for pe in range(n_pes):
                trace.write(
                    f"layer={layer.name} group={gi} pe={pe} "
                    f"batches={int(group_batches[pe])} busy={int(group_busy[pe])} "
                    f"group_cycles={group_cycles}\n"
                )

    dense_out = (
        np.concatenate(out_planes, axis=0)
        if out_planes
        else np.zeros((0, layer.Wo, layer.Ho), dtype=np.int64)
    )
    output = LayerOutput(
        out_blocks, DenseTensor(dense_out, OUT_ROLES), arch.pe_rows, arch.pe_cols
    )

    oaram_stored = sum(
        b.stored_count for blocks in out_blocks for b in blocks.values()
    )
    iaram_fp = Footprint(
        iaram_stored * fm.value_bits, iaram_stored * fm.index_overhead_bits
    )
    oaram_fp = Footprint(
        oaram_stored * fm.value_bits, oaram_stored * fm.index_overhead_bits
    )
    dram_tiled = False
    for pe in range(n_pes):
        in_stored = sum(b.stored_count for b in states[pe].iaram.values())
        out_stored = sum(b.stored_count for b in states[pe].oaram.values())
        if in_stored > arch.iaram_value_capacity or out_stored > arch.oaram_value_capacity:
            dram_tiled = True

    ev.act_ram_bits += iaram_stored * coded_bits * gplan.n_groups
    ev.act_ram_bits += oaram_stored * coded_bits
    for (gi, c), block in weights.blocks.items():
        va_sum = 0
        for pe in range(n_pes):
            entry = act_entries[pe].get(c)
            if entry is not None:
                va_sum += -((-entry[0].size) // I)
        ev.weight_buf_bits += block.stored_count * coded_bits * va_sum
    ev.dram_bits += weights.stored_values() * coded_bits
    if input_from_dram or dram_tiled:
        ev.dram_bits += iaram_stored * coded_bits
    if output_to_dram or dram_tiled:
        ev.dram_bits += oaram_stored * coded_bits

    ev.useful_mults = useful
    ev.energized_mults = ev.mult_ops
    ev.mult_slots = batches_total * F * I
    ev.pe_max_batches = int(pe_busy.max())

    energy, breakdown = arch.energy.rollup(ev)
    util = useful / (arch.total_mults * total_cycles) if total_cycles else 0.0
    wait_total = int(pe_wait.sum())
    report = SimReport(
        layer=layer.name,
        variant=VARIANT_SCNN,
        cycles=total_cycles,
        useful_mults=useful,
        mult_utilization=util,
        barrier_stall_fraction=(
            wait_total / (n_pes * total_cycles) if total_cycles else 0.0
        ),
        bank_conflict_stalls=conflict_stalls_total,
        fifo_stalls=fifo_stalls_total,
        drain_overhead_cycles=drain_overhead_total,
        stride_skipped=stride_skipped,
        batches=batches_total,
        events=ev,
        energy=energy,
        energy_breakdown=breakdown,
        iaram_footprint=iaram_fp,
        oaram_footprint=oaram_fp,
        dram_tiled=dram_tiled,
        pe_busy=tuple(int(b) for b in pe_busy),
        pe_wait=tuple(int(w) for w in pe_wait),
        kc=gplan.kc,
        n_groups=gplan.n_groups,
    )
    return output, report


def simulate_dcnn_layer(
    arch: ArchConfig,
    layer: LayerShape,
    weights: DenseTensor,
    acts: DenseTensor,
    variant: str = VARIANT_DCNN,
    pool: PoolSpec | None = None,
    input_from_dram: bool = True,
    output_to_dram: bool = False,
) -> SimReport:
    """Dense baseline cycle/energy model (dot-product inner core).

    Cycles are the dense-multiply throughput bound, taken as the maximum over
    PEs of their ragged output shares. The -opt variant has identical cycles
    but gates multiply energy on zero operands and moves compressed
    activations across DRAM.
    """
    if variant not in (VARIANT_DCNN, VARIANT_DCNN_OPT):
        raise ConfigurationError(f"unknown dense variant {variant}")
    wd, ad = weights.density(), acts.density()
    dense_arch = dcnn_arch(arch)
    counts = count_events(
        dense_arch,
        layer,
        "dense" if variant == VARIANT_DCNN else "dense-opt",
        (wd, ad),
        weights=weights,
        acts=acts,
        input_from_dram=input_from_dram,
        output_to_dram=output_to_dram,
    )
    if variant == VARIANT_DCNN_OPT:
        counts.energized_mults = _gated_mults(layer, weights, acts)

    plan = partition_tiles(layer, (arch.pe_rows, arch.pe_cols))
    per_out = layer.K * layer.channels_per_group * layer.R * layer.S
    pe_busy = [
        math.ceil(per_out * plan.owned_out_cells(pe) / arch.mults_per_pe)
        for pe in range(plan.n_pes)
    ]
    cycles = max(pe_busy)

    out_w, out_h = layer.Wo, layer.Ho
    if pool is not None:
        out_w, out_h = pool.out_extent(out_w), pool.out_extent(out_h)
    in_values = layer.C * layer.W * layer.H
    out_values = layer.K * out_w * out_h
    dram_tiled = in_values > dense_arch.n_pes * dense_arch.iaram_value_capacity or (
        out_values > dense_arch.n_pes * dense_arch.oaram_value_capacity
    )

    energy, breakdown = arch.energy.rollup(counts)
    useful = counts.useful_mults
    util = useful / (arch.total_mults * cycles) if cycles else 0.0
    wait = [cycles - b for b in pe_busy]
    return SimReport(
        layer=layer.name,
        variant=variant,
        cycles=cycles,
        useful_mults=useful,
        mult_utilization=util,
        barrier_stall_fraction=(
            sum(wait) / (arch.n_pes * cycles) if cycles else 0.0
        ),
        bank_conflict_stalls=0,
        fifo_stalls=0,
        drain_overhead_cycles=0,
        stride_skipped=0,
        batches=sum(pe_busy),
        events=counts,
        energy=energy,
        energy_breakdown=breakdown,
        iaram_footprint=Footprint(in_values * 16, 0),
        oaram_footprint=Footprint(out_values * 16, 0),
        dram_tiled=dram_tiled,
        pe_busy=tuple(pe_busy),
        pe_wait=tuple(wait),
    )


def _gated_mults(layer: LayerShape, weights: DenseTensor, acts: DenseTensor) -> int:
    """Dense products whose operands are both non-zero (padding taps count
    as zero operands): the multiplies DCNN-opt leaves energized."""
    pad, stride = layer.pad, layer.stride
    wo, ho = layer.Wo, layer.Ho
    padded = np.zeros((layer.C, layer.W + 2 * pad, layer.H + 2 * pad), dtype=bool)
    padded[:, pad : pad + layer.W, pad : pad + layer.H] = acts.values != 0
    kpg, cpg = layer.filters_per_group, layer.channels_per_group
    total = 0
    for r in range(layer.R):
        for s in range(layer.S):
            window = padded[:, r : r + stride * wo : stride, s : s + stride * ho : stride]
            a_nnz = window.reshape(layer.C, -1).sum(axis=1)
            for g in range(layer.groups):
                w_per_c = np.count_nonzero(
                    weights.values[g * kpg : (g + 1) * kpg, :, r, s], axis=0
                )
                total += int((w_per_c * a_nnz[g * cpg : (g + 1) * cpg]).sum())
    return total
