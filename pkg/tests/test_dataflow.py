import numpy as np
import pytest

from oracles import count_cartesian_products, naive_conv
from scnnsim.dataflow import (
    ConfigurationError,
    cartesian_work,
    choose_kc,
    output_coord,
    partition_tiles,
    strided_out_coord,
)
from scnnsim.tensors import ACT_ROLES, WEIGHT_ROLES, DenseTensor, LayerShape, gen_synthetic


class Arch:
    def __init__(self, rows=8, cols=8, banks=32, entries=32, dbl=True):
        self.pe_rows = rows
        self.pe_cols = cols
        self.accum_banks = banks
        self.bank_entries = entries
        self.accum_double_buffered = dbl


def layer(**kw):
    base = dict(C=2, K=4, W=8, H=8, R=3, S=3, pad=1)
    base.update(kw)
    return LayerShape(kw.get("name", "l"), **{k: v for k, v in base.items() if k != "name"})


class TestPartition:
    def test_even_2x2(self):
        plan = partition_tiles(layer(W=8, H=8), (2, 2))
        assert all(t.wt == 4 and t.ht == 4 for t in plan.tiles)
        assert plan.acc_extent(0) == (6, 6)
        # shared-edge halo is one cell wide for a 3x3 filter with pad 1
        regions = plan.regions(0)
        exported = [r for r in regions if not r.interior and r.owner is not None]
        assert any(r.xa_lo == 5 and r.xa_hi == 6 for r in exported)

    def test_monolithic_grid(self):
        plan = partition_tiles(layer(W=8, H=8), (1, 1))
        assert plan.acc_extent(0) == (10, 10)
        regions = plan.regions(0)
        assert all(r.owner in (0, None) for r in regions)

    def test_tiles_partition_plane_exactly(self):
        lay = layer(W=13, H=11)
        plan = partition_tiles(lay, (4, 3))
        cover = np.zeros((lay.W, lay.H), dtype=int)
        for t in plan.tiles:
            cover[t.x0 : t.x0 + t.wt, t.y0 : t.y0 + t.ht] += 1
        assert (cover == 1).all()

    def test_ragged_with_empty_tiles(self):
        lay = layer(W=13, H=13)
        plan = partition_tiles(lay, (8, 8))
        assert any(t.empty for t in plan.tiles)

    @pytest.mark.parametrize(
        "w,h,grid,r,s,pad,stride",
        [
            (13, 13, (8, 8), 3, 3, 1, 1),
            (8, 8, (2, 2), 3, 3, 1, 1),
            (9, 7, (3, 2), 5, 3, 2, 1),
            (12, 12, (4, 4), 3, 3, 0, 1),
            (17, 17, (4, 4), 5, 5, 2, 2),
            (6, 6, (8, 8), 1, 1, 0, 1),
        ],
    )
    def test_output_ownership_covers_exactly_once(self, w, h, grid, r, s, pad, stride):
        lay = layer(W=w, H=h, R=r, S=s, pad=pad, stride=stride)
        plan = partition_tiles(lay, grid)
        seen = np.zeros((lay.Wo, lay.Ho), dtype=int)
        for pe in range(plan.n_pes):
            (xl, xh), (yl, yh) = plan.owned_out_range(pe)
            seen[xl:xh, yl:yh] += 1
        assert (seen == 1).all()
        # every owned coordinate is reachable from the owner's accumulator,
        # and exported halo cells name the true owner of that coordinate
        for pe in range(plan.n_pes):
            t = plan.tile(pe)
            if t.empty:
                continue
            xb, yb = plan.acc_base(pe)
            ex, ey = plan.acc_extent(pe)
            for region in plan.regions(pe):
                for xa in range(region.xa_lo, region.xa_hi):
                    for ya in range(region.ya_lo, region.ya_hi):
                        xo, yo = xb + xa, yb + ya
                        if region.owner is None:
                            assert not (0 <= xo < lay.Wo and 0 <= yo < lay.Ho)
                        else:
                            (oxl, oxh), (oyl, oyh) = plan.owned_out_range(region.owner)
                            assert oxl <= xo < oxh and oyl <= yo < oyh

    def test_degenerate_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            partition_tiles(layer(), (0, 2))


class TestChooseKc:
    def test_ample_capacity_single_group(self):
        plan = choose_kc(layer(K=8, W=8, H=8), Arch(2, 2))
        assert plan.kc == 8
        assert plan.n_groups == 1

    def test_k_equal_one(self):
        plan = choose_kc(layer(K=1), Arch())
        assert plan.kc == 1
        assert plan.n_groups == 1

    def test_capacity_forces_groups(self):
        # 2x2 grid on 12x12 plane: 6x6 tiles, 8x8 accumulator = 64 cells,
        # 512 double-buffered entries -> Kc = 8 -> 8 groups of 8
        lay = layer(K=64, W=12, H=12)
        plan = choose_kc(lay, Arch(2, 2))
        assert plan.kc == 8
        assert plan.n_groups == 8

    def test_ragged_last_group(self):
        lay = layer(K=20, W=12, H=12)
        plan = choose_kc(lay, Arch(2, 2))
        assert [len(g) for g in plan.groups] == [8, 8, 4]

    def test_single_buffer_fallback_for_huge_tiles(self):
        lay = layer(K=4, W=224, H=224, C=1)
        plan = choose_kc(lay, Arch(8, 8))
        assert plan.kc == 1
        assert not plan.double_buffered

    def test_too_small_capacity_rejected(self):
        with pytest.raises(ConfigurationError):
            choose_kc(layer(W=64, H=64), Arch(1, 1, banks=4, entries=4))


class TestOutputCoord:
    def test_1x1_passthrough(self):
        assert output_coord((2, 0, 0), (3, 5), (1, 1)) == (2, 3, 5)

    def test_corner(self):
        assert output_coord((0, 2, 2), (0, 0), (3, 3)) == (0, 0, 0)

    def test_range_guarantee(self):
        R, S, wt, ht = 5, 3, 4, 6
        for r in range(R):
            for s in range(S):
                for x in range(wt):
                    for y in range(ht):
                        _, xa, ya = output_coord((0, r, s), (x, y), (R, S))
                        assert 0 <= xa <= wt + R - 2
                        assert 0 <= ya <= ht + S - 2

    def test_strided_skip(self):
        xo, ok = strided_out_coord(5, 0, 0, 4)
        assert not ok
        xo, ok = strided_out_coord(8, 0, 0, 4)
        assert ok and xo == 2


def scatter_reference(lay, weights, acts, grid):
    """Scatter every non-zero product through the plan's coordinate math and
    merge halos by global coordinate; must equal the convolution exactly."""
    plan = partition_tiles(lay, grid)
    full = np.zeros((lay.K, lay.Wo, lay.Ho), dtype=np.int64)
    cpg, kpg = lay.channels_per_group, lay.filters_per_group
    for pe in range(plan.n_pes):
        t = plan.tile(pe)
        if t.empty:
            continue
        for c in range(lay.C):
            g = c // cpg
            for k in range(g * kpg, (g + 1) * kpg):
                for r in range(lay.R):
                    for s in range(lay.S):
                        wv = int(weights.values[k, c % cpg, r, s])
                        if wv == 0:
                            continue
                        for x in range(t.wt):
                            for y in range(t.ht):
                                av = int(acts.values[c, t.x0 + x, t.y0 + y])
                                if av == 0:
                                    continue
                                xo, okx = strided_out_coord(t.x0 + x, r, lay.pad, lay.stride)
                                yo, oky = strided_out_coord(t.y0 + y, s, lay.pad, lay.stride)
                                if not (okx and oky):
                                    continue
                                if 0 <= xo < lay.Wo and 0 <= yo < lay.Ho:
                                    full[k, xo, yo] += wv * av
    return full


class TestScatterEquivalence:
    @pytest.mark.parametrize(
        "kw,grid",
        [
            (dict(C=2, K=3, W=6, H=6, R=3, S=3, pad=1), (2, 2)),
            (dict(C=2, K=2, W=7, H=5, R=3, S=3, pad=0), (3, 2)),
            (dict(C=3, K=4, W=8, H=8, R=5, S=5, pad=2), (2, 3)),
            (dict(C=2, K=2, W=9, H=9, R=3, S=3, pad=1, stride=2), (2, 2)),
            (dict(C=4, K=4, W=6, H=6, R=3, S=3, pad=1, groups=2), (2, 2)),
        ],
    )
    def test_scatter_matches_conv(self, kw, grid):
        lay = LayerShape("scatter", **kw)
        w = gen_synthetic(lay.weight_shape(), 0.6, seed=11)
        a = gen_synthetic(lay.input_shape(), 0.6, seed=12, signed=False)
        got = scatter_reference(lay, w, a, grid)
        expect = naive_conv(lay, w.values.tolist(), a.values.tolist())
        assert got.tolist() == expect


class TestCartesianWork:
    @pytest.mark.parametrize("groups", [1, 2])
    def test_matches_independent_recount(self, groups):
        lay = LayerShape("work", C=4, K=4, W=6, H=6, R=3, S=3, pad=1, groups=groups)
        w = gen_synthetic(lay.weight_shape(), 0.5, seed=21)
        a = gen_synthetic(lay.input_shape(), 0.4, seed=22, signed=False)
        assert cartesian_work(lay, w, a) == count_cartesian_products(
            lay, w.values.tolist(), a.values.tolist()
        )
