"""Engine checks: analytic cases, independent oracles, finite differences."""

import numpy as np
import pytest

from tiltwing.nn import (
    Adam,
    Dense,
    LSTM,
    Network,
    bce_with_logits,
    build_from_descriptor,
    load_network,
    lstm_cell,
    mlp,
    mse,
    save_network,
    sigmoid,
)
from tiltwing.nn.layers import Parameter

from oracles import fd_gradient, max_rel_err, naive_dense, scalar_lstm_cell


def zero_lstm(layer):
    for p in layer.parameters():
        p.value[...] = 0.0
    return layer


class TestDense:
    def test_zero_weights_zero_output(self):
        layer = Dense(4, 3, "linear", rng=np.random.default_rng(0))
        layer.w.value[...] = 0.0
        out = layer.forward(np.ones((2, 4)))
        assert np.all(out == 0.0)

    def test_identity_leaky_relu(self):
        layer = Dense(3, 3, "leaky_relu", rng=np.random.default_rng(0))
        layer.w.value[...] = np.eye(3)
        layer.b.value[...] = 0.0
        out = layer.forward(np.array([[-1.0, 0.5, 2.0]]))
        assert np.allclose(out, [[-0.2, 0.5, 2.0]])

    def test_matches_naive_matmul(self):
        rng = np.random.default_rng(7)
        layer = Dense(6, 5, "linear", rng=rng)
        x = rng.normal(size=(9, 6))
        want = naive_dense(x, layer.w.value, layer.b.value)
        assert max_rel_err(layer.forward(x), want) < 1e-12

    def test_three_axis_input(self):
        layer = Dense(4, 2, "tanh", rng=np.random.default_rng(1))
        x = np.random.default_rng(2).normal(size=(3, 7, 4))
        out = layer.forward(x)
        assert out.shape == (3, 7, 2)
        flat = layer.forward(x.reshape(-1, 4))
        assert np.array_equal(out.reshape(-1, 2), flat)

    def test_shape_mismatch_raises(self):
        layer = Dense(4, 2, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            layer.forward(np.zeros((2, 5)))

    def test_sigmoid_tanh_ranges(self):
        # float64 rounds sigma onto 1.0 past z ~ 36 and tanh onto +-1.0
        # past ~ 19, so probe the widest ranges where openness is
        # representable at all
        z = np.linspace(-30, 30, 301)
        s = sigmoid(z)
        assert np.all((s > 0.0) & (s < 1.0))
        zt = np.linspace(-18, 18, 301)
        assert np.all(np.abs(np.tanh(zt)) < 1.0)
        assert np.all(np.isfinite(sigmoid(np.array([-1e4, 1e4]))))


class TestLSTMCell:
    def test_zero_weights_halve_the_cell(self):
        layer = zero_lstm(LSTM(2, 4, rng=np.random.default_rng(0)))
        c_prev = np.array([[0.3, -0.8, 1.5, 0.0]])
        h_prev = np.zeros((1, 4))
        h_t, c_t = lstm_cell(layer, np.ones((1, 2)), h_prev, c_prev)
        assert np.allclose(c_t, 0.5 * c_prev, atol=1e-15)
        assert np.allclose(h_t, 0.5 * np.tanh(0.5 * c_prev), atol=1e-15)

    def test_saturated_forget_gate_is_memory(self):
        layer = zero_lstm(LSTM(2, 3, rng=np.random.default_rng(0)))
        layer.b_f.value[...] = 60.0  # sigma saturates to 1
        c_prev = np.array([[0.7, -0.2, 0.1]])
        _, c_t = lstm_cell(layer, np.zeros((1, 2)), np.zeros((1, 3)), c_prev)
        assert np.allclose(c_t, c_prev, atol=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(11)
        layer = LSTM(3, 5, rng=rng)
        x_t = rng.normal(size=(4, 3))
        h_prev = rng.normal(size=(4, 5)) * 0.5
        c_prev = rng.normal(size=(4, 5))
        h_t, c_t = lstm_cell(layer, x_t, h_prev, c_prev)
        want_h, want_c = scalar_lstm_cell(
            x_t, h_prev, c_prev,
            layer.w_i.value, layer.w_f.value, layer.w_o.value,
            layer.w_c.value, layer.b_i.value, layer.b_f.value,
            layer.b_o.value, layer.b_c.value)
        assert max_rel_err(h_t, want_h) < 1e-12
        assert max_rel_err(c_t, want_c) < 1e-12

    def test_sequence_forward_equals_cell_chain(self):
        rng = np.random.default_rng(3)
        layer = LSTM(2, 4, rng=rng)
        x = rng.normal(size=(3, 6, 2))
        h_seq = layer.forward(x)
        h = np.zeros((3, 4))
        c = np.zeros((3, 4))
        for t in range(6):
            h, c = lstm_cell(layer, x[:, t, :], h, c)
            assert max_rel_err(h_seq[:, t, :], h) < 1e-13

    def test_shape_mismatch_raises(self):
        layer = LSTM(3, 4, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            layer.forward(np.zeros((2, 5)))
        with pytest.raises(ValueError):
            lstm_cell(layer, np.zeros((1, 2)), np.zeros((1, 4)),
                      np.zeros((1, 4)))


def param_gradcheck(net, x, target, loss_fn, tol=1e-5, h=1e-5):
    """Backprop vs central differences for every parameter in the net."""
    net.zero_grad()
    out = net.forward(x, training=True)
    _, grad = loss_fn(out, target)
    net.backward(grad)

    def loss_value():
        value, _ = loss_fn(net.forward(x, training=True), target)
        return value

    worst = 0.0
    for p in net.all_parameters():
        analytic = p.grad.copy()
        fd = np.zeros_like(p.value)
        flat = p.value.ravel()
        fd_flat = fd.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_value()
            flat[i] = orig - h
            f_minus = loss_value()
            flat[i] = orig
            fd_flat[i] = (f_plus - f_minus) / (2.0 * h)
        worst = max(worst, max_rel_err(analytic, fd, floor=1e-6))
    assert worst < tol, f"worst relative gradient error {worst:.3e}"


class TestGradients:
    def test_single_neuron_analytic(self):
        layer = Dense(1, 1, "linear", rng=np.random.default_rng(0))
        layer.w.value[...] = 0.7
        layer.b.value[...] = -0.2
        net = Network([layer])
        x = np.array([[1.3]])
        y = np.array([[0.5]])
        net.zero_grad()
        pred = net.forward(x, training=True)
        _, g = mse(pred, y)
        net.backward(g)
        resid = 0.7 * 1.3 - 0.2 - 0.5
        assert abs(layer.w.grad[0, 0] - 2.0 * resid * 1.3) < 1e-12
        assert abs(layer.b.grad[0] - 2.0 * resid) < 1e-12

    @pytest.mark.parametrize("activation", ["linear", "leaky_relu",
                                            "sigmoid", "tanh"])
    def test_dense_every_activation(self, activation):
        rng = np.random.default_rng(31)
        net = mlp([5, 8, 3], hidden_activation=activation,
                  out_activation="linear", rng=rng)
        x = rng.normal(size=(6, 5)) + 0.1
        y = rng.normal(size=(6, 3))
        param_gradcheck(net, x, y, mse)

    def test_dense_with_batch_norm(self):
        rng = np.random.default_rng(5)
        net = mlp([4, 6, 2], hidden_activation="leaky_relu",
                  batch_norm=True, rng=rng)
        x = rng.normal(size=(8, 4))
        y = rng.normal(size=(8, 2))
        param_gradcheck(net, x, y, mse)

    def test_bce_head(self):
        rng = np.random.default_rng(13)
        net = mlp([3, 6, 1], hidden_activation="leaky_relu", rng=rng)
        x = rng.normal(size=(7, 3))
        y = (rng.random((7, 1)) > 0.5).astype(float)
        param_gradcheck(net, x, y, bce_with_logits)

    def test_lstm_bptt_ten_steps(self):
        rng = np.random.default_rng(17)
        net = Network([LSTM(3, 5, rng=rng), Dense(5, 1, rng=rng)])
        x = rng.normal(size=(2, 10, 3))
        y = rng.normal(size=(2, 10, 1))
        param_gradcheck(net, x, y, mse, tol=1e-4)

    def test_input_gradient(self):
        rng = np.random.default_rng(23)
        net = mlp([4, 7, 1], hidden_activation="tanh", rng=rng)
        x0 = rng.normal(size=(3, 4))
        y = rng.normal(size=(3, 1))
        net.zero_grad()
        out = net.forward(x0, training=True)
        _, g = mse(out, y)
        dx = net.backward(g)

        def f(x):
            value, _ = mse(net.forward(x, training=True), y)
            return value

        assert max_rel_err(dx, fd_gradient(f, x0), floor=1e-6) < 1e-5

    def test_gradient_through_frozen_network(self):
        rng = np.random.default_rng(29)
        gen = mlp([2, 6, 3], hidden_activation="tanh",
                  out_activation="sigmoid", rng=rng, name="gen")
        frozen = mlp([3, 5, 1], hidden_activation="leaky_relu",
                     batch_norm=True, rng=rng, name="frozen").freeze()
        assert frozen.parameters() == []
        x = rng.normal(size=(4, 2))
        y = rng.normal(size=(4, 1))

        gen.zero_grad()
        out = frozen.forward(gen.forward(x, training=True))
        _, g = mse(out, y)
        gen.backward(frozen.backward(g))
        analytic = [p.grad.copy() for p in gen.all_parameters()]

        def loss_for():
            return mse(frozen.forward(gen.forward(x, training=True)), y)[0]

        for p, a in zip(gen.all_parameters(), analytic):
            fd = np.zeros_like(p.value)
            flat = p.value.ravel()
            fd_flat = fd.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + 1e-5
                f_plus = loss_for()
                flat[i] = orig - 1e-5
                f_minus = loss_for()
                flat[i] = orig
                fd_flat[i] = (f_plus - f_minus) / 2e-5
            assert max_rel_err(a, fd, floor=1e-6) < 1e-5

    def test_backward_before_forward_raises(self):
        net = mlp([2, 2], rng=np.random.default_rng(0))
        with pytest.raises(RuntimeError):
            net.backward(np.zeros((1, 2)))


class TestLosses:
    def test_bce_matches_naive_formula(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=(20, 1)) * 3.0
        y = (rng.random((20, 1)) > 0.4).astype(float)
        p = 1.0 / (1.0 + np.exp(-z))
        naive = float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))
        value, _ = bce_with_logits(z, y)
        assert abs(value - naive) < 1e-12

    def test_bce_extreme_logits_stay_finite(self):
        z = np.array([[1000.0], [-1000.0]])
        y = np.array([[0.0], [1.0]])
        value, grad = bce_with_logits(z, y)
        assert np.isfinite(value)
        assert np.all(np.isfinite(grad))


class TestAdam:
    def test_zero_gradient_no_update(self):
        p = Parameter(np.array([1.0, -2.0]))
        opt = Adam([p], lr=0.1)
        opt.step()
        assert np.array_equal(p.value, [1.0, -2.0])

    def test_first_step_magnitude_is_lr(self):
        p = Parameter(np.array([5.0]))
        opt = Adam([p], lr=1e-3)
        p.grad[...] = 7.3
        opt.step()
        assert abs((5.0 - p.value[0]) - 1e-3) < 1e-9

    def test_quadratic_loss_decreases(self):
        p = Parameter(np.array([0.0]))
        opt = Adam([p], lr=0.01)
        losses = []
        for _ in range(100):
            losses.append(float((p.value[0] - 3.0) ** 2))
            p.grad[...] = 2.0 * (p.value[0] - 3.0)
            opt.step()
            p.zero_grad()
        tail = np.array(losses[5:])
        assert np.all(np.diff(tail) < 0.0)


class TestBatchNorm:
    def test_training_mode_normalizes(self):
        rng = np.random.default_rng(3)
        layer = Dense(4, 4, "linear", batch_norm=True, rng=rng)
        x = rng.normal(loc=5.0, scale=3.0, size=(256, 4))
        out = layer.forward(x, training=True)
        assert np.all(np.abs(out.mean(axis=0)) < 1e-10)
        assert np.all(np.abs(out.std(axis=0) - 1.0) < 1e-2)

    def test_inference_is_batch_size_independent(self):
        rng = np.random.default_rng(4)
        layer = Dense(3, 5, "leaky_relu", batch_norm=True, rng=rng)
        for _ in range(10):
            layer.forward(rng.normal(size=(32, 3)), training=True)
        batch = rng.normal(size=(16, 3))
        full = layer.forward(batch, training=False)
        for i in range(16):
            single = layer.forward(batch[i:i + 1], training=False)
            # BLAS reorders the affine sums between the matvec and matmul
            # paths, so equality holds to rounding, not bitwise
            assert max_rel_err(single[0], full[i]) < 1e-14

    def test_running_stats_momentum(self):
        layer = Dense(1, 1, "linear", batch_norm=True,
                      rng=np.random.default_rng(0))
        layer.w.value[...] = 1.0
        x = np.array([[2.0], [4.0]])  # batch mean 3, var 1
        layer.forward(x, training=True)
        assert abs(layer.running_mean[0] - 0.2 * 3.0) < 1e-12
        assert abs(layer.running_var[0] - (0.8 * 1.0 + 0.2 * 1.0)) < 1e-12


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(8)
        net = Network([Dense(3, 6, "leaky_relu", batch_norm=True, rng=rng),
                       LSTM(6, 4, rng=rng),
                       Dense(4, 1, rng=rng)], name="mixed")
        # push the BN buffers off their init values
        net.forward(rng.normal(size=(5, 7, 3)), training=True)
        path = tmp_path / "net.npz"
        save_network(net, path)
        clone = load_network(path)
        a = net.state_arrays()
        b = clone.state_arrays()
        assert a.keys() == b.keys()
        for key in a:
            assert np.array_equal(a[key], b[key]), key
        x = rng.normal(size=(2, 4, 3))
        assert np.array_equal(net.predict(x), clone.predict(x))

    def test_frozen_flag_survives(self, tmp_path):
        net = mlp([2, 3], rng=np.random.default_rng(0)).freeze()
        save_network(net, tmp_path / "f.npz")
        assert load_network(tmp_path / "f.npz").trainable is False

    def test_descriptor_rebuild_shapes(self):
        rng = np.random.default_rng(9)
        net = Network([LSTM(2, 3, rng=rng), Dense(3, 2, "sigmoid", rng=rng)])
        clone = build_from_descriptor(net.descriptor())
        for a, b in zip(net.all_parameters(), clone.all_parameters()):
            assert a.value.shape == b.value.shape


class TestDeterminism:
    def test_bit_identical_training_runs(self):
        def run():
            rng = np.random.default_rng(42)
            net = mlp([3, 8, 1], hidden_activation="leaky_relu", rng=rng)
            opt = Adam(net.parameters(), lr=1e-3)
            x = np.random.default_rng(1).normal(size=(16, 3))
            y = np.random.default_rng(2).normal(size=(16, 1))
            for _ in range(20):
                net.zero_grad()
                _, g = mse(net.forward(x, training=True), y)
                net.backward(g)
                opt.step()
            return np.concatenate([p.value.ravel()
                                   for p in net.parameters()])

        assert np.array_equal(run(), run())
