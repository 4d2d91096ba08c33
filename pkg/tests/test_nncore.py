import math

import numpy as np
import pytest

from signvec.nncore import (
    Parameter,
    Tensor,
    adam_step,
    cross_entropy,
    dropout,
    finite_difference_check,
    init_adam,
    linear,
    masked_mean_pool,
    multi_head_self_attention,
    softmax,
)
from signvec.nncore.autodiff import relu, tensor_mean
from signvec.nncore.ops import conv1d_temporal


def scalar_loss(out, probe):
    return tensor_mean(out * probe)


class TestLinear:
    def test_identity_weights(self):
        x = np.random.default_rng(0).normal(size=(3, 4))
        y = linear(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
        assert np.array_equal(y.data, x)

    def test_zero_input_gives_bias(self):
        b = np.array([1.0, -2.0])
        y = linear(Tensor(np.zeros((5, 3))), Tensor(np.zeros((3, 2))), Tensor(b))
        assert (y.data == b).all()

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        x = Parameter(rng.normal(size=(3, 4)), "x")
        w = Parameter(rng.normal(size=(4, 2)), "w")
        b = Parameter(rng.normal(size=(2,)), "b")
        probe = rng.normal(size=(3, 2))
        err = finite_difference_check(
            lambda: scalar_loss(linear(x, w, b), probe),
            {"x": x, "w": w, "b": b}, h=1e-5, samples_per_param=8)
        assert err < 1e-4

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))), Tensor(np.zeros(2)))


class TestConv1d:
    def test_k1_identity_kernel(self):
        x = np.random.default_rng(2).normal(size=(6, 3))
        w = np.eye(3)[None, :, :]  # k=1
        y = conv1d_temporal(Tensor(x), Tensor(w), Tensor(np.zeros(3)))
        assert np.allclose(y.data, x, atol=1e-12)

    def test_k3_center_tap_identity(self):
        x = np.random.default_rng(3).normal(size=(7, 4))
        w = np.zeros((3, 4, 4))
        w[1] = np.eye(4)
        y = conv1d_temporal(Tensor(x), Tensor(w), Tensor(np.zeros(4)))
        assert np.allclose(y.data, x, atol=1e-12)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            conv1d_temporal(Tensor(np.zeros((4, 2))), Tensor(np.zeros((2, 2, 2))),
                            Tensor(np.zeros(2)))

    def test_against_nested_loop_oracle(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(2, 9, 3))
        w = rng.normal(size=(5, 3, 4))
        b = rng.normal(size=(4,))
        y = conv1d_temporal(Tensor(x), Tensor(w), Tensor(b)).data

        pad = 2
        expected = np.zeros((2, 9, 4))
        for n in range(2):
            for t in range(9):
                for tap in range(5):
                    src = t + tap - pad
                    if 0 <= src < 9:
                        for ci in range(3):
                            for co in range(4):
                                expected[n, t, co] += x[n, src, ci] * w[tap, ci, co]
                expected[n, t] += b
        assert np.abs(y - expected).max() < 1e-10

    def test_shift_equivariance_interior(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(12, 3))
        w = rng.normal(size=(3, 3, 3))
        b = rng.normal(size=(3,))
        y = conv1d_temporal(Tensor(x), Tensor(w), Tensor(b)).data
        shifted = np.roll(x, 1, axis=0)
        y_shifted = conv1d_temporal(Tensor(shifted), Tensor(w), Tensor(b)).data
        # interior rows (padding-window away from both ends) shift along
        assert np.allclose(y_shifted[2:-1], y[1:-2], atol=1e-12)


class TestSoftmax:
    def test_uniform(self):
        y = softmax(Tensor(np.array([0.0, 0.0]))).data
        assert np.allclose(y, [0.5, 0.5], atol=1e-12)

    def test_closed_form(self):
        y = softmax(Tensor(np.array([math.log(2.0), 0.0]))).data
        assert np.allclose(y, [2 / 3, 1 / 3], atol=1e-12)

    def test_large_logits_no_overflow(self):
        y = softmax(Tensor(np.array([1000.0, 0.0]))).data
        assert np.isfinite(y).all()
        assert y[0] > 1 - 1e-12 and y[1] < 1e-12

    def test_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            z = rng.normal(scale=5.0, size=8)
            a = softmax(Tensor(z)).data
            b = softmax(Tensor(z + 123.456)).data
            assert abs(a.sum() - 1.0) < 1e-6
            assert np.allclose(a, b, atol=1e-6)


class TestAttention:
    @staticmethod
    def _params(rng, d):
        p = {
            "wq": Parameter(rng.normal(size=(d, d)) * 0.4, "wq"),
            "bq": Parameter(rng.normal(size=(d,)) * 0.1, "bq"),
            "wk": Parameter(rng.normal(size=(d, d)) * 0.4, "wk"),
            "wv": Parameter(rng.normal(size=(d, d)) * 0.4, "wv"),
            "bv": Parameter(rng.normal(size=(d,)) * 0.1, "bv"),
            "wo": Parameter(rng.normal(size=(d, d)) * 0.4, "wo"),
            "bo": Parameter(rng.normal(size=(d,)) * 0.1, "bo"),
        }
        return p

    def test_single_frame_weight_one(self):
        rng = np.random.default_rng(7)
        d = 6
        p = self._params(rng, d)
        x = rng.normal(size=(1, 1, d))
        out = multi_head_self_attention(Tensor(x), 2, np.ones((1, 1), bool), **p).data
        v = x[0] @ p["wv"].data + p["bv"].data
        expected = v @ p["wo"].data + p["bo"].data
        assert np.allclose(out[0], expected, atol=1e-12)

    def test_constant_keys_give_uniform_weights(self):
        rng = np.random.default_rng(8)
        d, t = 4, 5
        p = self._params(rng, d)
        p["wk"].data[:] = 0.0  # all key projections equal (zero) across time
        x = rng.normal(size=(1, t, d))
        out = multi_head_self_attention(Tensor(x), 2, np.ones((1, t), bool), **p).data
        v = x[0] @ p["wv"].data + p["bv"].data
        expected = np.tile(v.mean(axis=0), (t, 1)) @ p["wo"].data + p["bo"].data
        assert np.allclose(out[0], expected, atol=1e-10)

    def test_gradients_t4_d8_h2(self):
        rng = np.random.default_rng(9)
        d = 8
        p = self._params(rng, d)
        x = Parameter(rng.normal(size=(2, 4, d)), "x")
        mask = np.array([[True] * 4, [True, True, False, False]])
        probe = rng.normal(size=(2, 4, d))
        err = finite_difference_check(
            lambda: scalar_loss(
                multi_head_self_attention(x, 2, mask, **p), probe),
            dict(p, x=x), h=1e-5, samples_per_param=6)
        assert err < 1e-4

    def test_not_divisible_rejected(self):
        rng = np.random.default_rng(10)
        p = self._params(rng, 6)
        with pytest.raises(ValueError):
            multi_head_self_attention(Tensor(rng.normal(size=(1, 3, 6))), 4,
                                      np.ones((1, 3), bool), **p)

    def test_all_false_mask_rejected(self):
        rng = np.random.default_rng(11)
        p = self._params(rng, 4)
        mask = np.zeros((1, 3), bool)
        with pytest.raises(ValueError):
            multi_head_self_attention(Tensor(rng.normal(size=(1, 3, 4))), 2, mask, **p)

    def test_permutation_equivariance_without_positions(self):
        rng = np.random.default_rng(12)
        d, t = 8, 6
        p = self._params(rng, d)
        x = rng.normal(size=(1, t, d))
        perm = rng.permutation(t)
        mask = np.ones((1, t), bool)
        out = multi_head_self_attention(Tensor(x), 2, mask, **p).data
        out_perm = multi_head_self_attention(Tensor(x[:, perm]), 2, mask, **p).data
        assert np.allclose(out[:, perm], out_perm, atol=1e-6)


class TestCrossEntropy:
    def test_uniform_logits(self):
        loss = cross_entropy(Tensor(np.zeros((3, 4))), np.array([0, 1, 3]))
        assert abs(loss.item() - math.log(4)) < 1e-12

    def test_confident_correct(self):
        logits = np.zeros((2, 3))
        logits[0, 1] = 1000.0
        logits[1, 2] = 1000.0
        loss = cross_entropy(Tensor(logits), np.array([1, 2]))
        assert loss.item() < 1e-9

    def test_against_logsumexp_oracle(self):
        rng = np.random.default_rng(13)
        z = rng.normal(scale=3.0, size=(6, 5))
        labels = rng.integers(5, size=6)
        loss = cross_entropy(Tensor(z), labels).item()
        expected = 0.0
        for i in range(6):
            m = z[i].max()
            lse = m + math.log(np.exp(z[i] - m).sum())
            expected += lse - z[i, labels[i]]
        expected /= 6
        assert abs(loss - expected) < 1e-10

    def test_out_of_range_label(self):
        with pytest.raises(ValueError):
            cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))


class TestAdam:
    def test_first_step_magnitude(self):
        params = {"w": np.array([1.0, -2.0, 3.0])}
        grads = {"w": np.array([0.5, -0.1, 2.0])}
        state = init_adam(params, learning_rate=0.01)
        before = params["w"].copy()
        adam_step(params, grads, state)
        step = before - params["w"]
        # bias-corrected m/sqrt(v) = sign(g) on the first step
        assert np.allclose(np.abs(step), 0.01, rtol=1e-6)
        assert (np.sign(step) == np.sign(grads["w"])).all()

    def test_zero_gradient_no_move(self):
        params = {"w": np.array([1.0, 2.0])}
        state = init_adam(params)
        adam_step(params, {"w": np.zeros(2)}, state)
        assert np.array_equal(params["w"], [1.0, 2.0])

    def test_converges_on_quadratic(self):
        params = {"w": np.array([0.0])}
        state = init_adam(params, learning_rate=0.1)
        for _ in range(200):
            grads = {"w": 2.0 * (params["w"] - 3.0)}
            adam_step(params, grads, state)
        assert abs(params["w"][0] - 3.0) < 0.1

    def test_step_counter(self):
        params = {"w": np.zeros(1)}
        state = init_adam(params)
        assert state.t == 0
        adam_step(params, {"w": np.ones(1)}, state)
        assert state.t == 1


class TestDropoutAndPooling:
    def test_rate_zero_identity_in_train_mode(self):
        x = Tensor(np.random.default_rng(14).normal(size=(4, 5)))
        out = dropout(x, 0.0, np.random.default_rng(0), train=True)
        assert out is x

    def test_eval_mode_identity(self):
        x = Tensor(np.ones((2, 2)))
        assert dropout(x, 0.5, None, train=False) is x

    def test_inverted_scaling_preserves_mean(self):
        rng = np.random.default_rng(15)
        x = Tensor(np.ones((200, 200)))
        out = dropout(x, 0.25, rng, train=True)
        assert abs(out.data.mean() - 1.0) < 0.02

    def test_masked_mean_pool(self):
        x = np.arange(12, dtype=float).reshape(1, 4, 3)
        mask = np.array([[True, True, False, False]])
        out = masked_mean_pool(Tensor(x), mask).data
        assert np.allclose(out[0], x[0, :2].mean(axis=0))


class TestGradientPropertySweep:
    def test_primitives_match_finite_differences_20_seeds(self):
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            x = Parameter(rng.normal(size=(2, 5, 4)), "x")
            w1 = Parameter(rng.normal(size=(4, 6)) * 0.5, "w1")
            b1 = Parameter(rng.normal(size=(6,)) * 0.1, "b1")
            cw = Parameter(rng.normal(size=(3, 6, 6)) * 0.3, "cw")
            cb = Parameter(rng.normal(size=(6,)) * 0.1, "cb")
            labels = rng.integers(3, size=2)
            head = Parameter(rng.normal(size=(6, 3)) * 0.5, "head")
            hb = Parameter(rng.normal(size=(3,)) * 0.1, "hb")
            mask = np.ones((2, 5), bool)
            mask[1, 3:] = False

            def loss_fn():
                h = relu(linear(x, w1, b1))
                h = relu(conv1d_temporal(h, cw, cb))
                pooled = masked_mean_pool(h, mask)
                return cross_entropy(linear(pooled, head, hb), labels)

            err = finite_difference_check(
                loss_fn,
                {"x": x, "w1": w1, "b1": b1, "cw": cw, "cb": cb, "head": head, "hb": hb},
                h=1e-5, samples_per_param=3, seed=seed)
            assert err < 1e-4, f"seed {seed}: {err}"


class TestWeightSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(20)
        params = {
            "a.w": rng.normal(size=(3, 4)).astype(np.float32).astype(np.float64),
            "a.b": rng.normal(size=(4,)).astype(np.float32).astype(np.float64),
            "scalar": np.float64(2.5),
        }
        from signvec.nncore import deserialize_weights, serialize_weights

        loaded = deserialize_weights(serialize_weights(params))
        assert set(loaded) == set(params)
        for name, arr in loaded.items():
            assert arr.dtype == np.float32
            assert np.array_equal(arr, np.asarray(params[name], dtype=np.float32))

    def test_fingerprint_tracks_bytes(self):
        from signvec.nncore import weight_fingerprint

        params = {"w": np.ones((2, 2))}
        fp = weight_fingerprint(params)
        assert len(fp) == 32
        params["w"][0, 0] = 2.0
        assert weight_fingerprint(params) != fp

    def test_malformed_blobs_rejected(self):
        from signvec.nncore import WeightFormatError, deserialize_weights, serialize_weights

        blob = serialize_weights({"w": np.zeros((2, 3))})
        with pytest.raises(WeightFormatError):
            deserialize_weights(b"XXXX" + blob[4:])  # bad magic
        with pytest.raises(WeightFormatError):
            deserialize_weights(blob[:10])  # truncated
        with pytest.raises(WeightFormatError):
            deserialize_weights(blob + b"\x00")  # trailing bytes
        bumped = bytearray(blob)
        bumped[4] = 9  # version
        with pytest.raises(WeightFormatError):
            deserialize_weights(bytes(bumped))


class TestFiniteDifferenceCheck:
    def test_pure_linear_layer_near_exact(self):
        rng = np.random.default_rng(16)
        x = Tensor(rng.normal(size=(3, 4)))
        w = Parameter(rng.normal(size=(4, 2)), "w")
        b = Parameter(rng.normal(size=(2,)), "b")
        probe = rng.normal(size=(3, 2))
        err = finite_difference_check(lambda: scalar_loss(linear(x, w, b), probe),
                                      {"w": w, "b": b}, samples_per_param=8)
        assert err < 1e-7

    def test_detects_corrupted_gradient(self):
        rng = np.random.default_rng(17)
        x = Tensor(rng.normal(size=(3, 4)))
        w = Parameter(rng.normal(size=(4, 2)), "w")
        b = Parameter(rng.normal(size=(2,)), "b")
        probe = rng.normal(size=(3, 2))

        def loss_fn():
            return scalar_loss(linear(x, w, b), probe)

        w.zero_grad(); b.zero_grad()
        loss_fn().backward()
        corrupted = {"w": 2.0 * w.grad, "b": b.grad.copy()}  # 2x on one parameter
        err = finite_difference_check(loss_fn, {"w": w, "b": b}, analytic=corrupted,
                                      samples_per_param=8)
        assert err > 0.3
