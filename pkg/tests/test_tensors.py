import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_conv
from scnnsim.tensors import (
    ACT_ROLES,
    DenseTensor,
    FixedPointOverflow,
    LayerShape,
    ShapeError,
    WEIGHT_ROLES,
    apply_relu,
    density_stats,
    gen_synthetic,
    prune_magnitude,
    reference_conv,
)


def t(values, roles=None):
    arr = np.asarray(values)
    if roles is None:
        roles = tuple("d" * arr.ndim)
    return DenseTensor(arr, roles)


class TestLayerShape:
    def test_output_extent(self):
        layer = LayerShape("l", C=2, K=2, W=4, H=4, R=3, S=3, pad=1)
        assert (layer.Wo, layer.Ho) == (4, 4)

    def test_strided_extent(self):
        layer = LayerShape("l", C=3, K=96, W=227, H=227, R=11, S=11, stride=4)
        assert (layer.Wo, layer.Ho) == (55, 55)

    def test_non_integer_output_rejected(self):
        with pytest.raises(ShapeError):
            LayerShape("l", C=1, K=1, W=5, H=5, R=2, S=2, stride=2)

    def test_groups_must_divide(self):
        with pytest.raises(ShapeError):
            LayerShape("l", C=3, K=4, W=4, H=4, R=1, S=1, groups=2)

    def test_grouped_dense_multiplies(self):
        layer = LayerShape("conv2", C=96, K=256, W=27, H=27, R=5, S=5, pad=2, groups=2)
        assert layer.dense_multiplies() == 27 * 27 * 256 * 48 * 25


class TestReferenceConv:
    def test_degenerate_1x1(self):
        layer = LayerShape("one", C=1, K=1, W=1, H=1, R=1, S=1)
        out = reference_conv(layer, t([[[[3]]]], WEIGHT_ROLES), t([[[7]]], ACT_ROLES))
        assert out.values.tolist() == [[[21]]]

    def test_all_zero_weights_annihilate(self):
        layer = LayerShape("z", C=2, K=2, W=3, H=3, R=3, S=3, pad=1)
        rng = np.random.default_rng(0)
        acts = t(rng.integers(-9, 9, (2, 3, 3)), ACT_ROLES)
        w = t(np.zeros((2, 2, 3, 3), dtype=int), WEIGHT_ROLES)
        assert not reference_conv(layer, w, acts).values.any()

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_naive_triple_loop(self, seed):
        layer = LayerShape("rand", C=2, K=2, W=4, H=4, R=3, S=3, pad=1)
        rng = np.random.default_rng(seed)
        w = rng.integers(-9, 10, layer.weight_shape())
        a = rng.integers(-9, 10, layer.input_shape())
        expect = naive_conv(layer, w.tolist(), a.tolist())
        got = reference_conv(layer, t(w, WEIGHT_ROLES), t(a, ACT_ROLES))
        assert got.values.tolist() == expect

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(C=4, K=4, W=5, H=7, R=3, S=1, pad=0),
            dict(C=4, K=6, W=8, H=8, R=5, S=5, pad=2),
            dict(C=4, K=4, W=9, H=9, R=3, S=3, pad=1, stride=2),
            dict(C=4, K=4, W=6, H=6, R=3, S=3, pad=0, groups=2),
            dict(C=6, K=9, W=5, H=5, R=3, S=3, pad=2, stride=3, groups=3),
        ],
    )
    def test_matches_naive_across_shapes(self, kwargs):
        layer = LayerShape("shape", **kwargs)
        rng = np.random.default_rng(hash(str(kwargs)) % 2**32)
        w = rng.integers(-20, 21, layer.weight_shape())
        a = rng.integers(-20, 21, layer.input_shape())
        expect = naive_conv(layer, w.tolist(), a.tolist())
        got = reference_conv(layer, t(w, WEIGHT_ROLES), t(a, ACT_ROLES))
        assert got.values.tolist() == expect

    def test_linear_in_activations(self):
        layer = LayerShape("lin", C=2, K=3, W=4, H=4, R=3, S=3, pad=1)
        rng = np.random.default_rng(42)
        w = t(rng.integers(-9, 10, layer.weight_shape()), WEIGHT_ROLES)
        a = rng.integers(-9, 10, layer.input_shape())
        b = rng.integers(-9, 10, layer.input_shape())
        lhs = reference_conv(layer, w, t(a + b, ACT_ROLES)).values
        rhs = (
            reference_conv(layer, w, t(a, ACT_ROLES)).values
            + reference_conv(layer, w, t(b, ACT_ROLES)).values
        )
        assert (lhs == rhs).all()

    def test_dimension_mismatch(self):
        layer = LayerShape("mm", C=2, K=2, W=4, H=4, R=3, S=3, pad=1)
        w = t(np.zeros((2, 2, 3, 3), dtype=int), WEIGHT_ROLES)
        bad = t(np.zeros((3, 4, 4), dtype=int), ACT_ROLES)
        with pytest.raises(ShapeError):
            reference_conv(layer, w, bad)

    def test_accumulator_overflow_reported(self):
        layer = LayerShape("ovf", C=64, K=1, W=3, H=3, R=3, S=3, pad=1)
        w = t(np.full(layer.weight_shape(), 181, dtype=int), WEIGHT_ROLES)
        a = t(np.full(layer.input_shape(), 181, dtype=int), ACT_ROLES)
        with pytest.raises(FixedPointOverflow):
            reference_conv(layer, w, a)

    def test_operand_overflow_reported(self):
        layer = LayerShape("op", C=1, K=1, W=1, H=1, R=1, S=1)
        w = t([[[[1 << 16]]]], WEIGHT_ROLES)
        with pytest.raises(FixedPointOverflow):
            reference_conv(layer, w, t([[[1]]], ACT_ROLES))


class TestRelu:
    def test_definition(self):
        assert apply_relu(t([-3, 0, 5])).values.tolist() == [0, 0, 5]

    def test_all_negative_gives_zero_density(self):
        out = apply_relu(t([[-1, -2], [-3, -4]]))
        assert not out.values.any()
        assert out.density() == 0.0

    @given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=64))
    def test_idempotent(self, xs):
        once = apply_relu(t(xs))
        twice = apply_relu(once)
        assert once.values.tolist() == twice.values.tolist()

    def test_symmetric_distribution_halves_density(self):
        rng = np.random.default_rng(7)
        vals = rng.integers(1, 1000, 20000) * rng.choice([-1, 1], 20000)
        out = apply_relu(t(vals))
        assert abs(out.density() - 0.5) < 0.02


class TestPrune:
    def test_top_two_survive(self):
        out = prune_magnitude(t([5, -1, 3, 2]), 0.5)
        assert out.values.tolist() == [5, 0, 3, 0]

    def test_density_one_is_identity(self):
        x = t([4, -4, 0, 9])
        assert prune_magnitude(x, 1.0).values.tolist() == x.values.tolist()

    def test_exact_resulting_density(self):
        rng = np.random.default_rng(3)
        x = t(rng.choice([-1, 1], 1000) * rng.integers(1, 500, 1000))
        out = prune_magnitude(x, 0.3)
        assert out.nnz() == 300
        assert out.density() == pytest.approx(0.3)

    def test_tie_break_by_lowest_index(self):
        out = prune_magnitude(t([2, -2, 2, 1]), 0.5)
        assert out.values.tolist() == [2, -2, 0, 0]

    @given(
        st.lists(st.integers(-99, 99), min_size=1, max_size=40),
        st.floats(0.05, 1.0),
    )
    def test_hadamard_mask(self, xs, d):
        x = t(xs)
        out = prune_magnitude(x, d)
        kept = out.values != 0
        assert (out.values[kept] == x.values[kept]).all()

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            prune_magnitude(t(np.zeros((0,), dtype=int)), 0.5)


class TestSynthetic:
    def test_density_zero_all_zero(self):
        assert gen_synthetic((4, 5), 0.0, seed=1).nnz() == 0

    def test_density_one_no_zeros(self):
        assert gen_synthetic((4, 5), 1.0, seed=1).nnz() == 20

    def test_deterministic(self):
        a = gen_synthetic((3, 8, 8), 0.4, seed=9)
        b = gen_synthetic((3, 8, 8), 0.4, seed=9)
        assert (a.values == b.values).all()

    @pytest.mark.parametrize("d", [0.1, 0.25, 0.5, 0.9])
    def test_exact_density(self, d):
        x = gen_synthetic((10, 10), d, seed=2)
        assert x.nnz() == int(np.ceil(d * 100))

    def test_lower_density_positions_nested(self):
        hi = gen_synthetic((6, 6), 0.8, seed=5)
        lo = gen_synthetic((6, 6), 0.3, seed=5)
        hi_pos = set(zip(*np.nonzero(hi.values)))
        lo_pos = set(zip(*np.nonzero(lo.values)))
        assert lo_pos <= hi_pos
        for p in lo_pos:
            assert lo.values[p] == hi.values[p]

    def test_unsigned_mode(self):
        x = gen_synthetic((50,), 1.0, seed=4, signed=False)
        assert (x.values > 0).all()


class TestDensityStats:
    def test_half_half_quarter_work(self):
        w = gen_synthetic((10, 10), 0.5, seed=1)
        a = gen_synthetic((10, 10), 0.5, seed=2)
        stats = density_stats(w, a)
        assert stats.ideal_work_fraction == pytest.approx(0.25)

    def test_fully_dense(self):
        w = gen_synthetic((4, 4), 1.0, seed=1)
        stats = density_stats(w, w)
        assert stats.ideal_work_fraction == 1.0

    def test_work_reduction_factor_four(self):
        w = gen_synthetic((20, 20), 0.5, seed=3)
        a = gen_synthetic((20, 20), 0.5, seed=4)
        stats = density_stats(w, a)
        assert 1.0 / stats.ideal_work_fraction == pytest.approx(4.0)

    def test_per_layer_entries(self):
        ws = [gen_synthetic((8, 8), d, seed=i) for i, d in enumerate((0.25, 0.75))]
        as_ = [gen_synthetic((8, 8), 0.5, seed=9 + i) for i in range(2)]
        stats = density_stats(ws, as_, per_layer=True, names=["a", "b"])
        assert len(stats.per_layer) == 2
        for entry in stats.per_layer:
            assert entry.ideal_work_fraction == pytest.approx(
                entry.weight_density * entry.activation_density
            )
