"""Tensor op semantics, brute-force oracle agreement, and gradient checks."""

import numpy as np
import pytest

from earlygesture import tensor as tz
from earlygesture.errors import ConfigError, ShapeError
from earlygesture.gradcheck import check_gradients
from earlygesture.tensor import Tensor

from oracles import conv3d_oracle, maxpool_oracle


def rand(shape, seed=0, scale=1.0):
    return np.random.default_rng(seed).normal(scale=scale, size=shape)


class TestConv3d:
    def test_zero_input_gives_bias(self):
        x = Tensor(np.zeros((1, 2, 4, 6, 6)))
        k = Tensor(rand((3, 2, 3, 3, 3), seed=1))
        b = Tensor(np.array([1.0, -2.0, 0.5]))
        out = tz.conv3d(x, k, b, (1, 1, 1))
        for o in range(3):
            assert np.all(out.data[:, o] == b.data[o])

    def test_ones_cube_center_counts_27(self):
        x = Tensor(np.ones((1, 1, 3, 3, 3)))
        k = Tensor(np.ones((1, 1, 3, 3, 3)))
        b = Tensor(np.zeros(1))
        out = tz.conv3d(x, k, b, (1, 1, 1))
        assert out.data[0, 0, 1, 1, 1] == 27.0

    def test_matches_direct_summation_oracle(self):
        x = rand((1, 2, 4, 5, 5), seed=2)
        k = rand((3, 2, 3, 3, 3), seed=3)
        b = rand((3,), seed=4)
        got = tz.conv3d(Tensor(x), Tensor(k), Tensor(b), (1, 1, 1)).data
        want = conv3d_oracle(x, k, b, (1, 1, 1))
        assert np.max(np.abs(got - want)) <= 1e-9

    def test_fuzz_against_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            n, c, o = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
            t, h, w = (int(rng.integers(1, 7)) for _ in range(3))
            kt = int(rng.choice([1, 3]))
            pads = (kt // 2, 1, 1)
            if h + 2 < 3 or w + 2 < 3:
                continue
            x = rng.normal(size=(n, c, t, h, w))
            k = rng.normal(size=(o, c, kt, 3, 3))
            b = rng.normal(size=(o,))
            got = tz.conv3d(Tensor(x), Tensor(k), Tensor(b), pads).data
            want = conv3d_oracle(x, k, b, pads)
            assert got.shape == want.shape
            assert np.max(np.abs(got - want)) <= 1e-9

    def test_channel_mismatch_names_both_shapes(self):
        x = Tensor(np.zeros((1, 2, 3, 4, 4)))
        k = Tensor(np.zeros((1, 3, 3, 3, 3)))
        with pytest.raises(ShapeError) as err:
            tz.conv3d(x, k, Tensor(np.zeros(1)), (1, 1, 1))
        assert "(1, 2, 3, 4, 4)" in str(err.value)
        assert "(1, 3, 3, 3, 3)" in str(err.value)

    def test_gradients(self):
        x = Tensor(rand((1, 2, 3, 4, 4), seed=5), requires_grad=True)
        k = Tensor(rand((2, 2, 3, 3, 3), seed=6), requires_grad=True)
        b = Tensor(rand((2,), seed=7), requires_grad=True)

        def loss():
            y = tz.conv3d(x, k, b, (1, 1, 1))
            return tz.sum_all(tz.mul(y, y))

        check_gradients(loss, [x, k, b])


class TestMaxPool:
    def test_simple_window(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 1, 2, 2)
        out = tz.maxpool3d_spatial(Tensor(x))
        assert out.data[0, 0, 0, 0, 0] == 4.0

    def test_constant_ties_route_to_first(self):
        x = Tensor(np.ones((1, 1, 1, 2, 2)), requires_grad=True)
        out = tz.maxpool3d_spatial(x)
        tz.sum_all(out).backward()
        assert out.data[0, 0, 0, 0, 0] == 1.0
        expected = np.zeros((1, 1, 1, 2, 2))
        expected[0, 0, 0, 0, 0] = 1.0
        assert np.array_equal(x.grad, expected)

    def test_fuzz_against_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            n, c, t = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 5)
            h, w = 2 * int(rng.integers(1, 4)), 2 * int(rng.integers(1, 4))
            x = rng.normal(size=(n, c, t, h, w))
            got = tz.maxpool3d_spatial(Tensor(x)).data
            want, _ = maxpool_oracle(x)
            assert np.array_equal(got, want)

    def test_gradient_routes_to_argmax(self):
        rng = np.random.default_rng(12)
        x_arr = rng.normal(size=(1, 2, 2, 4, 4))
        x = Tensor(x_arr, requires_grad=True)
        tz.sum_all(tz.maxpool3d_spatial(x)).backward()
        _, argmax = maxpool_oracle(x_arr)
        expected = np.zeros_like(x_arr)
        n, c, t, h2, w2, _ = argmax.shape
        for idx in np.ndindex(n, c, t, h2, w2):
            dy, dx = argmax[idx]
            expected[idx[0], idx[1], idx[2], 2 * idx[3] + dy, 2 * idx[4] + dx] += 1.0
        assert np.array_equal(x.grad, expected)

    def test_odd_extent_rejected(self):
        with pytest.raises(ShapeError):
            tz.maxpool3d_spatial(Tensor(np.zeros((1, 1, 1, 3, 4))))

    def test_gradcheck(self):
        # Continuous random inputs keep ties away from the kink.
        x = Tensor(rand((1, 2, 2, 4, 4), seed=13), requires_grad=True)
        check_gradients(lambda: tz.sum_all(tz.mul(tz.maxpool3d_spatial(x),
                                                  tz.maxpool3d_spatial(x))), [x])


class TestBatchNorm:
    def test_train_mode_normalizes(self):
        rng = np.random.default_rng(21)
        x = rng.normal(loc=5.0, scale=2.0, size=(4, 3, 5, 6, 6))
        scale = Tensor(np.ones(3))
        shiftv = Tensor(np.zeros(3))
        rm, rv = np.zeros(3), np.ones(3)
        out = tz.batchnorm(Tensor(x), scale, shiftv, rm, rv, training=True)
        for c in range(3):
            assert abs(out.data[:, c].mean()) < 1e-10
            assert abs(out.data[:, c].var() - 1.0) < 1e-3

    def test_running_stats_update(self):
        rng = np.random.default_rng(22)
        x = rng.normal(loc=2.0, size=(2, 2, 3, 4, 4))
        rm, rv = np.zeros(2), np.ones(2)
        tz.batchnorm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)),
                     rm, rv, training=True, momentum=0.1)
        batch_mean = x.mean(axis=(0, 2, 3, 4))
        assert np.allclose(rm, 0.1 * batch_mean)

    def test_eval_mode_is_affine(self):
        rng = np.random.default_rng(23)
        x = rng.normal(size=(1, 2, 2, 4, 4))
        rm, rv = np.zeros(2), np.ones(2)
        out = tz.batchnorm(Tensor(x), Tensor(np.full(2, 2.0)), Tensor(np.full(2, 3.0)),
                           rm, rv, training=False)
        assert np.allclose(out.data, 2.0 * x + 3.0, atol=1e-4)

    @pytest.mark.parametrize("training", [True, False])
    def test_gradcheck(self, training):
        x = Tensor(rand((2, 2, 3, 4, 4), seed=24), requires_grad=True)
        scale = Tensor(rand((2,), seed=25) + 1.5, requires_grad=True)
        shiftv = Tensor(rand((2,), seed=26), requires_grad=True)

        def loss():
            rm, rv = np.zeros(2), np.ones(2)  # fresh stats per evaluation
            y = tz.batchnorm(x, scale, shiftv, rm, rv, training=training)
            return tz.sum_all(tz.mul(y, y))

        check_gradients(loss, [x, scale, shiftv])


class TestActivationsAndSoftmax:
    def test_softmax_uniform_on_zeros(self):
        out = tz.softmax(Tensor(np.zeros((1, 3))))
        assert np.allclose(out.data, 1.0 / 3.0)

    def test_softmax_sums_to_one(self):
        rng = np.random.default_rng(31)
        out = tz.softmax(Tensor(rng.normal(scale=5.0, size=(10, 7))))
        assert np.max(np.abs(out.data.sum(axis=-1) - 1.0)) <= 1e-12

    def test_relu_sigmoid_tanh_values(self):
        x = np.array([-2.0, 0.0, 3.0])
        assert np.array_equal(tz.relu(Tensor(x)).data, [0.0, 0.0, 3.0])
        assert np.allclose(tz.sigmoid(Tensor(np.zeros(1))).data, 0.5)
        assert np.allclose(tz.tanh(Tensor(np.zeros(1))).data, 0.0)

    @pytest.mark.parametrize("op", [tz.sigmoid, tz.tanh, tz.softmax])
    def test_smooth_op_gradients(self, op):
        x = Tensor(rand((3, 5), seed=32), requires_grad=True)
        check_gradients(lambda: tz.sum_all(tz.mul(op(x), op(x))), [x])

    def test_relu_gradient_away_from_kink(self):
        x_arr = rand((4, 4), seed=33)
        x_arr[np.abs(x_arr) < 0.05] = 0.5
        x = Tensor(x_arr, requires_grad=True)
        check_gradients(lambda: tz.sum_all(tz.mul(tz.relu(x), tz.relu(x))), [x])

    def test_log_clamps_at_floor(self):
        x = Tensor(np.array([1e-20, 0.5]), requires_grad=True)
        out = tz.log(x)
        assert out.data[0] == np.log(1e-12)
        tz.sum_all(out).backward()
        assert x.grad[0] == 0.0
        assert np.isclose(x.grad[1], 2.0)


class TestDropout:
    def test_p_zero_is_identity(self):
        x = Tensor(rand((3, 4), seed=41))
        out = tz.dropout(x, 0.0, np.random.default_rng(0), training=True)
        assert out is x

    def test_eval_mode_is_identity(self):
        x = Tensor(rand((3, 4), seed=42))
        out = tz.dropout(x, 0.5, np.random.default_rng(0), training=False)
        assert out is x

    def test_invalid_probability_rejected(self):
        x = Tensor(np.zeros((2, 2)))
        with pytest.raises(ConfigError):
            tz.dropout(x, 1.0, np.random.default_rng(0), training=True)
        with pytest.raises(ConfigError):
            tz.dropout(x, -0.1, np.random.default_rng(0), training=True)

    def test_volumetric_drops_whole_feature_maps(self):
        x = Tensor(np.ones((2, 8, 3, 4, 4)))
        out = tz.dropout(x, 0.5, np.random.default_rng(7), training=True, volumetric=True)
        for n in range(2):
            for c in range(8):
                block = out.data[n, c]
                assert np.all(block == 0.0) or np.all(block == 2.0)
        assert np.any(out.data == 0.0)

    def test_kept_units_scaled(self):
        x = Tensor(np.ones((200, 50)))
        out = tz.dropout(x, 0.25, np.random.default_rng(3), training=True)
        kept = out.data[out.data != 0]
        assert np.allclose(kept, 1.0 / 0.75)

    def test_gradient_uses_same_mask(self):
        x = Tensor(rand((6, 6), seed=43), requires_grad=True)

        def loss():
            y = tz.dropout(x, 0.4, np.random.default_rng(9), training=True)
            return tz.sum_all(tz.mul(y, y))

        check_gradients(loss, [x])


class TestPlumbingOps:
    def test_matmul_shapes_checked(self):
        with pytest.raises(ShapeError):
            tz.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))

    def test_matmul_gradcheck(self):
        a = Tensor(rand((3, 4), seed=51), requires_grad=True)
        b = Tensor(rand((4, 2), seed=52), requires_grad=True)
        check_gradients(lambda: tz.sum_all(tz.mul(a @ b, a @ b)), [a, b])

    def test_add_broadcast_bias(self):
        a = Tensor(rand((5, 3), seed=53), requires_grad=True)
        b = Tensor(rand((3,), seed=54), requires_grad=True)
        check_gradients(lambda: tz.sum_all(tz.mul(a + b, a + b)), [a, b])

    def test_stack_and_take_frame_roundtrip(self):
        rows = [Tensor(rand((2, 3), seed=s), requires_grad=True) for s in (55, 56, 57)]
        stacked = tz.stack(rows, axis=1)
        assert stacked.shape == (2, 3, 3)
        frame = tz.take_frame(stacked, 1, axis=1)
        assert np.array_equal(frame.data, rows[1].data)
        check_gradients(
            lambda: tz.sum_all(tz.mul(tz.take_frame(tz.stack(rows, axis=1), 1, axis=1),
                                      tz.take_frame(tz.stack(rows, axis=1), 1, axis=1))),
            rows)

    def test_pick_class_gathers(self):
        probs = Tensor(rand((4, 3), seed=58) ** 2 + 0.1, requires_grad=True)
        labels = np.array([0, 2, 1, 1])
        picked = tz.pick_class(probs, labels)
        assert np.array_equal(picked.data, probs.data[np.arange(4), labels])
        check_gradients(lambda: tz.sum_all(tz.mul(tz.pick_class(probs, labels),
                                                  tz.pick_class(probs, labels))), [probs])

    def test_transpose_reshape_gradients(self):
        x = Tensor(rand((2, 3, 4), seed=59), requires_grad=True)

        def loss():
            y = tz.reshape(tz.transpose(x, (1, 0, 2)), (12, 2))
            return tz.sum_all(tz.mul(y, y))

        check_gradients(loss, [x])

    def test_backward_needs_scalar(self):
        x = Tensor(np.zeros((2, 2)), requires_grad=True)
        with pytest.raises(ShapeError):
            (x + x).backward()

    def test_grad_accumulates_over_shared_use(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        y = tz.mul(x, x)
        tz.sum_all(y).backward()
        assert np.allclose(x.grad, [6.0])
