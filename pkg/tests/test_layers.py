"""Forward-pass oracles for every layer kind plus model composition."""

import numpy as np
import pytest

from strokedet.architectures import (
    build_architecture,
    init_params,
    model_forward,
    mse_loss_and_grads,
)
from strokedet.errors import ConfigError, NumericError
from strokedet.layers import (
    bidirectional_forward,
    conv1d_forward,
    dense_forward,
    gru_forward,
)


def gru_params(rng, cin, h):
    return {
        "W": rng.uniform(-1, 1, (cin, 3 * h)),
        "U": rng.uniform(-1, 1, (h, 3 * h)),
        "bw": rng.uniform(-1, 1, 3 * h),
        "bu": rng.uniform(-1, 1, 3 * h),
    }


class TestConv1dForward:
    def test_zero_kernel_zero_output(self):
        x = np.random.default_rng(0).normal(size=(10, 3))
        out = conv1d_forward(x, np.zeros((3, 3, 2)), np.zeros(2))
        assert not out.any()

    def test_delta_kernel_identity(self):
        x = np.random.default_rng(1).normal(size=(12, 1))
        kernel = np.zeros((3, 1, 1))
        kernel[1, 0, 0] = 1.0
        np.testing.assert_allclose(conv1d_forward(x, kernel, np.zeros(1)), x, atol=1e-15)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(2)
        t, cin, cout, k = 9, 3, 4, 3
        x = rng.normal(size=(t, cin))
        kernel = rng.normal(size=(k, cin, cout))
        bias = rng.normal(size=cout)
        # naive zero-padded convolution, one tap at a time
        expected = np.zeros((t, cout))
        pad = (k - 1) // 2
        for ti in range(t):
            for co in range(cout):
                acc = bias[co]
                for j in range(k):
                    src = ti + j - pad
                    if 0 <= src < t:
                        for ci in range(cin):
                            acc += x[src, ci] * kernel[j, ci, co]
                expected[ti, co] = acc
        out = conv1d_forward(x, kernel, bias, activation="linear")
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            conv1d_forward(np.zeros((5, 2)), np.zeros((3, 3, 1)), np.zeros(1))


class TestDenseForward:
    def test_zero_weight_constant_bias(self):
        x = np.random.default_rng(0).normal(size=(6, 2))
        out = dense_forward(x, np.zeros((2, 3)), np.full(3, 1.5), mode="timedistributed")
        assert (out == 1.5).all()

    def test_flatten_consumes_whole_window(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(4, 2))
        w = rng.normal(size=(8, 3))
        b = rng.normal(size=3)
        out = dense_forward(x, w, b, mode="flatten")
        np.testing.assert_allclose(out[:, 0], x.reshape(-1) @ w + b, atol=1e-12)

    def test_timedistributed_param_shape(self):
        # 128-channel input, one output unit -> 129 parameters
        w = np.zeros((128, 1))
        b = np.zeros(1)
        assert w.size + b.size == 129
        out = dense_forward(np.zeros((5, 128)), w, b, mode="timedistributed")
        assert out.shape == (5, 1)

    def test_bad_mode_rejected(self):
        with pytest.raises(ConfigError):
            dense_forward(np.zeros((4, 2)), np.zeros((2, 1)), np.zeros(1), mode="conv")


class TestGruForward:
    def test_zero_params_zero_output(self):
        x = np.random.default_rng(0).normal(size=(7, 2))
        params = {"W": np.zeros((2, 9)), "U": np.zeros((3, 9)),
                  "bw": np.zeros(9), "bu": np.zeros(9)}
        assert not gru_forward(x, params).any()

    def test_matches_scalar_gate_oracle(self):
        rng = np.random.default_rng(7)
        t, cin, h = 5, 2, 3
        params = gru_params(rng, cin, h)
        x = rng.uniform(-1, 1, (t, cin))

        def sigmoid(a):
            return 1.0 / (1.0 + np.exp(-a))

        hidden = np.zeros(h)
        expected = []
        for step in range(t):
            gx = x[step] @ params["W"] + params["bw"]
            gh = hidden @ params["U"] + params["bu"]
            z = sigmoid(gx[:h] + gh[:h])
            r = sigmoid(gx[h:2 * h] + gh[h:2 * h])
            n = np.tanh(gx[2 * h:] + r * gh[2 * h:])
            hidden = z * hidden + (1.0 - z) * n
            expected.append(hidden.copy())
        np.testing.assert_allclose(gru_forward(x, params), np.array(expected), atol=1e-12)

    def test_update_gate_one_copies_h0(self):
        rng = np.random.default_rng(3)
        params = gru_params(rng, 2, 4)
        params["bw"] = params["bw"].copy()
        params["bw"][:4] = 1e3  # saturates z at exactly 1.0
        h0 = rng.uniform(-1, 1, 4)
        out = gru_forward(rng.uniform(-1, 1, (6, 2)), params, h0=h0)
        np.testing.assert_array_equal(out, np.tile(h0, (6, 1)))

    def test_non_finite_input_rejected(self):
        params = gru_params(np.random.default_rng(0), 1, 2)
        x = np.array([[1.0], [np.nan]])
        with pytest.raises(NumericError):
            gru_forward(x, params)


class TestBidirectionalForward:
    def test_time_symmetric_input_symmetry(self):
        rng = np.random.default_rng(5)
        params = gru_params(rng, 1, 3)
        half = rng.uniform(-1, 1, 4)
        x = np.concatenate([half, half[::-1]])[:, None]  # palindrome
        out = bidirectional_forward(x, params, params)
        np.testing.assert_allclose(out[:, :3], out[::-1, 3:], atol=1e-12)

    def test_hidden_mismatch_rejected(self):
        rng = np.random.default_rng(6)
        with pytest.raises(ConfigError):
            bidirectional_forward(
                np.zeros((4, 1)), gru_params(rng, 1, 2), gru_params(rng, 1, 3)
            )

    def test_output_width_doubles(self):
        rng = np.random.default_rng(8)
        out = bidirectional_forward(
            rng.normal(size=(5, 1)), gru_params(rng, 1, 4), gru_params(rng, 1, 4)
        )
        assert out.shape == (5, 8)


class TestModelForward:
    def test_zero_params_zero_output(self):
        spec = build_architecture("gruc1")
        params = {k: np.zeros_like(v) for k, v in init_params(spec, 0).items()}
        out = model_forward(spec, params, np.random.default_rng(0).normal(size=1000))
        assert out.shape == (1000,) and not out.any()

    @pytest.mark.parametrize("name", ["cnnc1", "gruc1", "bgruc1"])
    def test_output_length_preserved(self, name):
        spec = build_architecture(name)
        params = init_params(spec, 1)
        out = model_forward(spec, params, np.random.default_rng(1).normal(size=(1000, 1)))
        assert out.shape == (1000,)

    def test_cnnc1_matches_layer_composition(self):
        # compose the individually tested layer primitives by hand
        spec = build_architecture("cnnc1")
        params = init_params(spec, 2)
        x = np.random.default_rng(2).normal(size=(1000, 1))
        ref = x
        for i, layer in enumerate(spec.layers):
            prefix = f"layer{i:02d}.conv1d"
            ref = conv1d_forward(ref, params[f"{prefix}.kernel"], params[f"{prefix}.bias"],
                                 activation=layer.activation)
        out = model_forward(spec, params, x)
        np.testing.assert_allclose(out, ref[:, 0], atol=1e-10)

    def test_params_mismatch_rejected(self):
        spec = build_architecture("gruc1")
        params = init_params(spec, 0)
        del params["layer00.gru.W"]
        with pytest.raises(ConfigError):
            model_forward(spec, params, np.zeros(1000))


class TestMseLossAndGrads:
    def test_perfect_prediction_zero_everything(self):
        spec = build_architecture("gruc1")
        params = {k: np.zeros_like(v) for k, v in init_params(spec, 0).items()}
        loss, grads = mse_loss_and_grads(spec, params, np.zeros(1000), np.zeros(1000))
        assert loss == 0.0
        assert all(not g.any() for g in grads.values())

    def test_single_dense_layer_closed_form(self):
        from strokedet.architectures import ArchitectureSpec, LayerSpec

        rng = np.random.default_rng(9)
        t = 50
        spec = ArchitectureSpec(
            name="lin", layers=(LayerSpec("dense_timedistributed", 1, 1, "linear"),),
            input_length=t,
        )
        w = rng.normal(size=(1, 1))
        b = rng.normal(size=1)
        params = {"layer00.dense_timedistributed.weight": w,
                  "layer00.dense_timedistributed.bias": b}
        x = rng.normal(size=(t, 1))
        y = rng.normal(size=t)
        loss, grads = mse_loss_and_grads(spec, params, x, y)
        pred = (x * w[0, 0] + b[0])[:, 0]
        assert loss == pytest.approx(np.mean((pred - y) ** 2), abs=1e-12)
        # analytic: dL/dw = 2/N * x^T (pred - y)
        expected_dw = 2.0 / t * x[:, 0] @ (pred - y)
        expected_db = 2.0 / t * np.sum(pred - y)
        assert grads["layer00.dense_timedistributed.weight"][0, 0] == pytest.approx(expected_dw, rel=1e-12)
        assert grads["layer00.dense_timedistributed.bias"][0] == pytest.approx(expected_db, rel=1e-12)
