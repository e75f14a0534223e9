"""Layer-op contracts: hand values, invariants, and brute-force oracle parity."""

import math

import numpy as np
import pytest

from floraclass.errors import ShapeError
from floraclass.nn import ops

from oracles import (
    conv2d_oracle,
    dense_oracle,
    depthwise_oracle,
    global_avg_pool_oracle,
)


def rng_for(case):
    return np.random.default_rng([42, case])


class TestConv2d:
    def test_all_ones_valid(self):
        x = np.ones((3, 3, 1), dtype=np.float32)
        k = np.ones((3, 3, 1, 1), dtype=np.float32)
        out = ops.conv2d(x, k, np.zeros(1, dtype=np.float32), stride=1, padding="valid")
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == pytest.approx(9.0)

    def test_identity_pointwise(self):
        rng = rng_for(0)
        x = rng.normal(size=(5, 4, 3)).astype(np.float32)
        k = np.eye(3, dtype=np.float32).reshape(1, 1, 3, 3)
        out = ops.conv2d(x, k, np.zeros(3, dtype=np.float32), padding="same")
        np.testing.assert_allclose(out, x, rtol=1e-6)

    @pytest.mark.parametrize("case", range(20))
    def test_matches_loop_oracle(self, case):
        rng = rng_for(case)
        stride = int(rng.integers(1, 3))
        padding = ["same", "valid"][case % 2]
        h, w = int(rng.integers(4, 8)), int(rng.integers(4, 8))
        cin, cout = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        k = int(rng.integers(1, 4))
        x = rng.normal(size=(h, w, cin)).astype(np.float32)
        kernel = rng.normal(size=(k, k, cin, cout)).astype(np.float32)
        bias = rng.normal(size=cout).astype(np.float32)
        got = ops.conv2d(x, kernel, bias, stride=stride, padding=padding)
        want = conv2d_oracle(x, kernel, bias, stride=stride, padding=padding)
        np.testing.assert_allclose(got, want, atol=1e-5)

    def test_channel_mismatch(self):
        x = np.zeros((4, 4, 2), dtype=np.float32)
        k = np.zeros((3, 3, 3, 4), dtype=np.float32)
        with pytest.raises(ShapeError, match="channel"):
            ops.conv2d(x, k, np.zeros(4, dtype=np.float32))

    def test_zero_sized_output(self):
        x = np.zeros((2, 2, 1), dtype=np.float32)
        k = np.zeros((3, 3, 1, 1), dtype=np.float32)
        with pytest.raises(ShapeError, match="empty"):
            ops.conv2d(x, k, np.zeros(1, dtype=np.float32), padding="valid")

    def test_same_output_size(self):
        x = np.zeros((7, 5, 1), dtype=np.float32)
        k = np.zeros((3, 3, 1, 2), dtype=np.float32)
        out = ops.conv2d(x, k, np.zeros(2, dtype=np.float32), stride=2, padding="same")
        assert out.shape == (math.ceil(7 / 2), math.ceil(5 / 2), 2)


class TestDepthwise:
    def test_single_channel_equals_conv(self):
        rng = rng_for(100)
        x = rng.normal(size=(6, 6, 1)).astype(np.float32)
        k = rng.normal(size=(3, 3, 1)).astype(np.float32)
        b = rng.normal(size=1).astype(np.float32)
        dw = ops.depthwise_conv2d(x, k, b, stride=1, padding="same")
        cv = ops.conv2d(x, k[..., None], b, stride=1, padding="same")
        np.testing.assert_allclose(dw, cv, atol=1e-6)

    def test_constant_input_edge_weights(self):
        c = 3.0
        x = np.full((5, 5, 1), c, dtype=np.float32)
        k = np.ones((3, 3, 1), dtype=np.float32)
        out = ops.depthwise_conv2d(x, k, np.zeros(1, dtype=np.float32), padding="same")
        assert out[2, 2, 0] == pytest.approx(9 * c)
        assert out[0, 2, 0] == pytest.approx(6 * c)
        assert out[0, 0, 0] == pytest.approx(4 * c)

    @pytest.mark.parametrize("case", range(20))
    def test_matches_loop_oracle(self, case):
        rng = rng_for(1000 + case)
        stride = int(rng.integers(1, 3))
        padding = ["same", "valid"][case % 2]
        h, w = int(rng.integers(4, 8)), int(rng.integers(4, 8))
        c = int(rng.integers(1, 5))
        k = int(rng.integers(1, 4))
        x = rng.normal(size=(h, w, c)).astype(np.float32)
        kernel = rng.normal(size=(k, k, c)).astype(np.float32)
        bias = rng.normal(size=c).astype(np.float32)
        got = ops.depthwise_conv2d(x, kernel, bias, stride=stride, padding=padding)
        want = depthwise_oracle(x, kernel, bias, stride=stride, padding=padding)
        np.testing.assert_allclose(got, want, atol=1e-5)

    def test_channel_mismatch(self):
        x = np.zeros((4, 4, 2), dtype=np.float32)
        k = np.zeros((3, 3, 3), dtype=np.float32)
        with pytest.raises(ShapeError, match="channel"):
            ops.depthwise_conv2d(x, k, np.zeros(3, dtype=np.float32))


class TestReluGap:
    def test_relu_values(self):
        out = ops.relu(np.array([-1.0, 0.0, 2.0], dtype=np.float32))
        np.testing.assert_array_equal(out, [0.0, 0.0, 2.0])

    def test_relu_nonnegative_unchanged(self):
        x = np.abs(rng_for(7).normal(size=(4, 4, 2))).astype(np.float32)
        np.testing.assert_array_equal(ops.relu(x), x)

    def test_relu_idempotent(self):
        x = rng_for(8).normal(size=(3, 5)).astype(np.float32)
        np.testing.assert_array_equal(ops.relu(ops.relu(x)), ops.relu(x))

    def test_gap_constant(self):
        x = np.full((4, 6, 3), 2.5, dtype=np.float32)
        np.testing.assert_allclose(ops.global_avg_pool(x), [2.5, 2.5, 2.5])

    def test_gap_small(self):
        x = np.array([1.0, 2.0, 3.0, 4.0], dtype=np.float32).reshape(2, 2, 1)
        assert ops.global_avg_pool(x)[0] == pytest.approx(2.5)

    def test_gap_matches_oracle(self):
        x = rng_for(9).normal(size=(5, 7, 4)).astype(np.float32)
        np.testing.assert_allclose(
            ops.global_avg_pool(x), global_avg_pool_oracle(x), atol=1e-6
        )


class TestDense:
    def test_identity(self):
        x = np.array([1.0, -2.0, 3.0], dtype=np.float32)
        out = ops.dense(x, np.eye(3, dtype=np.float32), np.zeros(3, dtype=np.float32))
        np.testing.assert_allclose(out, x)

    def test_zero_weights_gives_bias(self):
        x = np.ones(4, dtype=np.float32)
        b = np.array([1.0, 2.0], dtype=np.float32)
        out = ops.dense(x, np.zeros((4, 2), dtype=np.float32), b)
        np.testing.assert_allclose(out, b)

    def test_matches_oracle(self):
        rng = rng_for(10)
        x = rng.normal(size=8).astype(np.float32)
        w = rng.normal(size=(8, 5)).astype(np.float32)
        b = rng.normal(size=5).astype(np.float32)
        np.testing.assert_allclose(
            ops.dense(x, w, b), dense_oracle(x, w, b), atol=1e-6
        )

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError, match="mismatch"):
            ops.dense(
                np.zeros(3, dtype=np.float32),
                np.zeros((4, 2), dtype=np.float32),
                np.zeros(2, dtype=np.float32),
            )


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        p = ops.softmax(np.zeros(5, dtype=np.float32))
        np.testing.assert_allclose(p, np.full(5, 0.2), atol=1e-7)

    def test_closed_form(self):
        p = ops.softmax(np.array([math.log(2.0), 0.0], dtype=np.float64))
        np.testing.assert_allclose(p, [2 / 3, 1 / 3], atol=1e-9)

    def test_shift_invariance(self):
        rng = rng_for(11)
        x = rng.normal(size=6)
        for k in (-100.0, 3.5, 1e4):
            np.testing.assert_allclose(ops.softmax(x + k), ops.softmax(x), atol=1e-9)

    def test_sums_to_one_in_open_interval(self):
        p = ops.softmax(rng_for(12).normal(size=9) * 10)
        assert p.sum() == pytest.approx(1.0, abs=1e-6)
        assert np.all(p > 0) and np.all(p < 1)

    def test_ce_onehot_is_zero(self):
        assert ops.cross_entropy(np.array([0.0, 1.0, 0.0]), 1) == pytest.approx(0.0)

    def test_ce_uniform(self):
        c = 7
        p = np.full(c, 1 / c)
        assert ops.cross_entropy(p, 3) == pytest.approx(math.log(c))

    def test_ce_half(self):
        assert ops.cross_entropy(np.array([0.5, 0.5]), 0) == pytest.approx(math.log(2))

    def test_ce_bad_class(self):
        with pytest.raises(ShapeError):
            ops.cross_entropy(np.array([0.5, 0.5]), 2)
