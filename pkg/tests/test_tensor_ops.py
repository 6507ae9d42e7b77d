"""Primitive operator contracts: closed-form cases, loop oracles, errors."""

import numpy as np
import pytest

from scopenet import ops
from scopenet.ops import ConvParams
from scopenet.tensor import ShapeError, Tensor

from oracles import conv2d_oracle, fully_connected_oracle, \
    nearest_upsample_oracle, pixel_shuffle_oracle


def conv_params(weight, bias, stride=1, padding=0):
    return ConvParams(weight=Tensor(weight), bias=Tensor(bias),
                      stride=stride, padding=padding)


class TestConv2d:
    def test_identity_1x1(self):
        """Channel-identity 1x1 weights with zero bias pass input through."""
        rng = np.random.default_rng(1)
        x = Tensor(rng.standard_normal((2, 3, 4, 5)).astype(np.float32))
        weight = np.eye(3, dtype=np.float32).reshape(3, 3, 1, 1)
        out = ops.conv2d(x, conv_params(weight, np.zeros(3, np.float32)))
        np.testing.assert_array_equal(out.data, x.data)

    def test_box_kernel_zero_padding(self):
        """All-ones 3x3 kernel on a constant map: 9v interior, 4v corners."""
        v = 0.5
        x = Tensor(np.full((1, 1, 5, 5), v, dtype=np.float32))
        weight = np.ones((1, 1, 3, 3), dtype=np.float32)
        out = ops.conv2d(x, conv_params(weight, np.zeros(1, np.float32),
                                        padding=1))
        assert out.shape == (1, 1, 5, 5)
        np.testing.assert_allclose(out.data[0, 0, 2, 2], 9 * v, rtol=1e-6)
        for corner in ((0, 0), (0, 4), (4, 0), (4, 4)):
            np.testing.assert_allclose(out.data[0, 0][corner], 4 * v,
                                       rtol=1e-6)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
        weight = (rng.standard_normal((4, 3, 3, 3)) / 5).astype(np.float32)
        bias = rng.standard_normal(4).astype(np.float32) / 5
        out = ops.conv2d(Tensor(x), conv_params(weight, bias, padding=1))
        expected = conv2d_oracle(x, weight, bias, stride=1, pad=1)
        np.testing.assert_allclose(out.data, expected, atol=1e-6)

    def test_matches_loop_oracle_double_precision(self):
        rng = np.random.default_rng(20)
        x = rng.standard_normal((1, 2, 6, 6))
        weight = rng.standard_normal((3, 2, 3, 3)) / 5
        bias = rng.standard_normal(3) / 5
        out = ops.conv2d(Tensor(x), conv_params(weight, bias, padding=1))
        expected = conv2d_oracle(x, weight, bias, stride=1, pad=1)
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_strided_matches_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 2, 9, 9)).astype(np.float32)
        weight = (rng.standard_normal((3, 2, 3, 3)) / 5).astype(np.float32)
        bias = np.zeros(3, dtype=np.float32)
        out = ops.conv2d(Tensor(x), conv_params(weight, bias, stride=2,
                                                padding=1))
        expected = conv2d_oracle(x, weight, bias, stride=2, pad=1)
        assert out.shape == (1, 3, 5, 5)
        np.testing.assert_allclose(out.data, expected, atol=1e-6)

    def test_channel_mismatch_names_dimension(self):
        x = Tensor(np.zeros((1, 2, 4, 4), dtype=np.float32))
        weight = np.zeros((1, 3, 3, 3), dtype=np.float32)
        with pytest.raises(ShapeError, match="channels"):
            ops.conv2d(x, conv_params(weight, np.zeros(1, np.float32)))

    def test_too_small_spatial(self):
        x = Tensor(np.zeros((1, 1, 2, 2), dtype=np.float32))
        weight = np.zeros((1, 1, 5, 5), dtype=np.float32)
        with pytest.raises(ShapeError, match="spatial"):
            ops.conv2d(x, conv_params(weight, np.zeros(1, np.float32)))

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError, match="odd"):
            conv_params(np.zeros((1, 1, 4, 4), np.float32),
                        np.zeros(1, np.float32))


class TestSoftmaxPerPosition:
    def test_uniform_on_zero_logits(self):
        x = Tensor(np.zeros((1, 9, 3, 3), dtype=np.float32))
        out = ops.softmax_per_position(x)
        np.testing.assert_allclose(out.data, 1.0 / 9.0, rtol=1e-6)

    def test_saturation(self):
        logits = np.zeros((1, 9, 2, 2), dtype=np.float64)
        logits[0, 4] = 50.0
        out = ops.softmax_per_position(Tensor(logits))
        assert out.data[0, 4].min() >= 1.0 - 1e-15
        assert out.data[0, [i for i in range(9) if i != 4]].max() < 1e-15

    def test_normalization_identity(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.standard_normal((2, 25, 5, 6)).astype(np.float32) * 3)
        sums = ops.softmax_per_position(x).data.sum(axis=1)
        assert np.all(sums >= 1 - 1e-6) and np.all(sums <= 1 + 1e-6)

    def test_normalization_identity_double_precision(self):
        rng = np.random.default_rng(21)
        x = Tensor(rng.standard_normal((2, 9, 4, 4)) * 3)
        sums = ops.softmax_per_position(x).data.sum(axis=1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)

    def test_non_square_channels_rejected(self):
        with pytest.raises(ShapeError, match="square"):
            ops.softmax_per_position(Tensor(np.zeros((1, 8, 2, 2),
                                                     np.float32)))


class TestPixelShuffle:
    def test_factor_one_identity(self):
        rng = np.random.default_rng(5)
        x = Tensor(rng.standard_normal((1, 4, 3, 3)).astype(np.float32))
        np.testing.assert_array_equal(ops.pixel_shuffle(x, 1).data, x.data)

    def test_subpixel_layout(self):
        x = Tensor(np.array([1.0, 2.0, 3.0, 4.0],
                            dtype=np.float32).reshape(1, 4, 1, 1))
        out = ops.pixel_shuffle(x, 2)
        np.testing.assert_array_equal(out.data[0, 0],
                                      [[1.0, 2.0], [3.0, 4.0]])

    def test_inverse_pair_exact(self):
        rng = np.random.default_rng(6)
        x = Tensor(rng.standard_normal((2, 8, 3, 5)).astype(np.float32))
        back = ops.pixel_unshuffle(ops.pixel_shuffle(x, 2), 2)
        np.testing.assert_array_equal(back.data, x.data)

    def test_matches_index_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((1, 18, 2, 3)).astype(np.float32)
        out = ops.pixel_shuffle(Tensor(x), 3)
        np.testing.assert_array_equal(out.data, pixel_shuffle_oracle(x, 3)
                                      .astype(np.float32))

    def test_indivisible_channels_rejected(self):
        with pytest.raises(ShapeError, match="divisible"):
            ops.pixel_shuffle(Tensor(np.zeros((1, 6, 2, 2), np.float32)), 2)


class TestUnfoldNeighborhood:
    def test_k1_identity(self):
        rng = np.random.default_rng(8)
        x = Tensor(rng.standard_normal((1, 3, 4, 4)).astype(np.float32))
        np.testing.assert_array_equal(ops.unfold_neighborhood(x, 1).data,
                                      x.data)

    def test_center_patch_row_major(self):
        x = Tensor(np.arange(1.0, 10.0,
                             dtype=np.float32).reshape(1, 1, 3, 3))
        out = ops.unfold_neighborhood(x, 3)
        np.testing.assert_array_equal(out.data[0, :, 1, 1],
                                      np.arange(1.0, 10.0))

    def test_corner_zero_padding(self):
        x = Tensor(np.arange(1.0, 10.0,
                             dtype=np.float32).reshape(1, 1, 3, 3))
        patch = ops.unfold_neighborhood(x, 3).data[0, :, 0, 0]
        assert (patch == 0).sum() == 5
        assert patch.sum() == 1 + 2 + 4 + 5

    def test_even_window_rejected(self):
        with pytest.raises(ShapeError, match="odd"):
            ops.unfold_neighborhood(Tensor(np.zeros((1, 1, 3, 3),
                                                    np.float32)), 2)


class TestResampling:
    def test_upsample_factor_one(self):
        rng = np.random.default_rng(9)
        x = Tensor(rng.standard_normal((1, 2, 3, 3)).astype(np.float32))
        np.testing.assert_array_equal(ops.nearest_upsample(x, 1).data, x.data)

    def test_upsample_single_value(self):
        x = Tensor(np.full((1, 1, 1, 1), 0.7, dtype=np.float32))
        out = ops.nearest_upsample(x, 2)
        np.testing.assert_array_equal(out.data,
                                      np.full((1, 1, 2, 2), 0.7, np.float32))

    def test_upsample_blocks_constant(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal((1, 2, 3, 3)).astype(np.float32)
        out = ops.nearest_upsample(Tensor(x), 2).data
        np.testing.assert_array_equal(
            out, nearest_upsample_oracle(x, 2).astype(np.float32))

    def test_upsample_zero_factor_rejected(self):
        with pytest.raises(ShapeError, match="factor"):
            ops.nearest_upsample(Tensor(np.zeros((1, 1, 2, 2), np.float32)),
                                 0)

    def test_avg_pool_identity(self):
        rng = np.random.default_rng(11)
        x = Tensor(rng.standard_normal((1, 2, 4, 4)).astype(np.float32))
        np.testing.assert_array_equal(ops.avg_pool_to(x, 4, 4).data, x.data)

    def test_avg_pool_block_mean(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]],
                            dtype=np.float32).reshape(1, 1, 2, 2))
        np.testing.assert_allclose(ops.avg_pool_to(x, 1, 1).data,
                                   [[[[2.5]]]])

    def test_global_pool_is_mean(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((2, 3, 6, 6)).astype(np.float32)
        out = ops.global_avg_pool(Tensor(x))
        np.testing.assert_allclose(out.data[:, :, 0, 0],
                                   x.mean(axis=(2, 3)), atol=1e-6)

    def test_avg_pool_indivisible_rejected(self):
        with pytest.raises(ShapeError, match="divisible"):
            ops.avg_pool_to(Tensor(np.zeros((1, 1, 5, 5), np.float32)), 2, 2)


class TestActivationsAndArithmetic:
    def test_hardswish_breakpoints(self):
        x = Tensor(np.array([0.0, 3.0, -3.0, 6.0, -6.0], dtype=np.float64)
                   .reshape(1, 5, 1, 1))
        out = ops.hardswish(x).data.reshape(-1)
        np.testing.assert_allclose(out, [0.0, 3.0, 0.0, 6.0, 0.0], atol=0)

    def test_sigmoid_origin(self):
        assert ops.sigmoid(Tensor(np.zeros((1, 1, 1, 1)))).data[0, 0, 0, 0] \
            == 0.5

    def test_add_sub_identities(self):
        rng = np.random.default_rng(13)
        x = Tensor(rng.standard_normal((1, 2, 3, 3)).astype(np.float32))
        zero = Tensor(np.zeros_like(x.data))
        np.testing.assert_array_equal(ops.sub(x, x).data, 0 * x.data)
        np.testing.assert_array_equal(ops.add(x, zero).data, x.data)

    def test_shape_mismatch_rejected(self):
        a = Tensor(np.zeros((1, 2, 3, 3), np.float32))
        b = Tensor(np.zeros((1, 2, 4, 3), np.float32))
        with pytest.raises(ShapeError, match="match"):
            ops.add(a, b)

    def test_relu_clamps_negative(self):
        x = Tensor(np.array([-1.0, 0.0, 2.0]).reshape(1, 3, 1, 1))
        np.testing.assert_array_equal(ops.relu(x).data.reshape(-1),
                                      [0.0, 0.0, 2.0])


class TestFullyConnected:
    def test_identity_weight(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((2, 4, 1, 1)).astype(np.float32)
        out = ops.fully_connected(Tensor(x),
                                  Tensor(np.eye(4, dtype=np.float32)),
                                  Tensor(np.zeros(4, np.float32)))
        np.testing.assert_array_equal(out.data, x.reshape(2, 4))

    def test_zero_weight_gives_bias(self):
        x = Tensor(np.ones((3, 4, 1, 1), dtype=np.float32))
        bias = np.array([0.1, -0.2], dtype=np.float32)
        out = ops.fully_connected(x, Tensor(np.zeros((2, 4), np.float32)),
                                  Tensor(bias))
        np.testing.assert_array_equal(out.data, np.tile(bias, (3, 1)))

    def test_matches_dot_oracle(self):
        rng = np.random.default_rng(15)
        x = rng.standard_normal((3, 5, 1, 1)).astype(np.float32)
        w = rng.standard_normal((4, 5)).astype(np.float32) / 3
        b = rng.standard_normal(4).astype(np.float32) / 3
        out = ops.fully_connected(Tensor(x), Tensor(w), Tensor(b))
        np.testing.assert_allclose(out.data,
                                   fully_connected_oracle(x, w, b),
                                   atol=1e-6)

    def test_dim_mismatch_rejected(self):
        x = Tensor(np.zeros((1, 4, 1, 1), np.float32))
        with pytest.raises(ShapeError, match="match"):
            ops.fully_connected(x, Tensor(np.zeros((2, 5), np.float32)),
                                Tensor(np.zeros(2, np.float32)))


class TestPurity:
    def test_ops_bit_stable_across_runs(self):
        """Identical inputs give bit-identical outputs on repeated calls."""
        rng = np.random.default_rng(16)
        x = rng.standard_normal((2, 4, 6, 6)).astype(np.float32)
        w = rng.standard_normal((9, 4, 3, 3)).astype(np.float32) / 6
        params = conv_params(w, np.zeros(9, np.float32), padding=1)

        def pipeline():
            logits = ops.conv2d(Tensor(x), params)
            return ops.softmax_per_position(logits).data

        first, second = pipeline(), pipeline()
        np.testing.assert_array_equal(first, second)
