import math

import numpy as np
import pytest

from services import net
from utils.errors import DegenerateMaskError, NonFiniteGradientError, ShapeMismatchError


def _random_case(seed, weighted_scale=1.0):
    rng = np.random.default_rng(seed)
    backbone = "finer" if seed % 2 else "siren"
    params = net.init_mlp(int(rng.integers(1, 3)), int(rng.integers(2, 9)), int(rng.choice([1, 3])),
                          net.activation_for(backbone), seed)
    n = int(rng.integers(1, 17))
    coords = rng.uniform(-1.0, 1.0, size=(n, 2))
    targets = rng.random((n, params.out_dim))
    weights = rng.uniform(0.05, 1.0, size=targets.shape) * weighted_scale
    return params, net.CoordBatch(coords, targets, weights)


def _flat(params):
    return params.weights + params.biases


def _finite_difference(params, batch, weighted, step=1e-5):
    numeric = []
    for arr in _flat(params):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            keep = arr[idx]
            arr[idx] = keep + step
            up, _ = net.loss_and_grad(params, batch, weighted)
            arr[idx] = keep - step
            down, _ = net.loss_and_grad(params, batch, weighted)
            arr[idx] = keep
            g[idx] = (up - down) / (2.0 * step)
        numeric.append(g)
    return numeric


class TestActivation:
    def test_sine(self):
        act = net.Activation("sine", 30.0)
        assert act(np.array([0.01]))[0] == pytest.approx(math.sin(0.3))
        assert act.derivative(np.array([0.01]))[0] == pytest.approx(30.0 * math.cos(0.3))

    def test_finer(self):
        act = net.Activation("finer", 30.0)
        z = np.array([-0.2, 0.15])
        np.testing.assert_allclose(act(z), np.sin(30.0 * (np.abs(z) + 1.0) * z))
        h = 1e-7
        numeric = (act(z + h) - act(z - h)) / (2 * h)
        np.testing.assert_allclose(act.derivative(z), numeric, rtol=1e-6)

    def test_backbone_mapping(self):
        assert net.activation_for("siren").kind == "sine"
        assert net.activation_for("finer").kind == "finer"
        with pytest.raises(ValueError):
            net.activation_for("scone")


class TestInit:
    def test_shapes_and_bounds(self):
        params = net.init_mlp(3, 256, 3, net.Activation(), 0)
        assert [W.shape for W in params.weights] == [(256, 2), (256, 256), (256, 256), (3, 256)]
        assert params.dims == [2, 256, 256, 256, 3]
        assert np.all(np.abs(params.weights[0]) <= 0.5)
        hidden_bound = math.sqrt(6.0 / 256) / 30.0
        for W in params.weights[1:]:
            assert np.all(np.abs(W) <= hidden_bound)
        assert all(np.all(b == 0.0) for b in params.biases)

    def test_same_seed_same_params(self):
        a = net.init_mlp(2, 16, 1, net.Activation(), 7)
        b = net.init_mlp(2, 16, 1, net.Activation(), 7)
        c = net.init_mlp(2, 16, 1, net.Activation(), 8)
        assert all(np.array_equal(x, y) for x, y in zip(_flat(a), _flat(b)))
        assert not np.array_equal(a.weights[0], c.weights[0])

    def test_finer_first_layer_bias(self):
        params = net.init_mlp(2, 32, 3, net.activation_for("finer"), 3, finer_bias_scale=0.5)
        first = params.biases[0]
        assert np.all(np.abs(first) <= 0.5) and np.any(first != 0.0)
        assert all(np.all(b == 0.0) for b in params.biases[1:])

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            net.init_mlp(0, 8, 1, net.Activation(), 0)
        with pytest.raises(ValueError):
            net.init_mlp(1, 8, 2, net.Activation(), 0)


class TestForward:
    def test_zero_network(self):
        params = net.init_mlp(2, 4, 3, net.Activation(), 0)
        params = net.MlpParams([np.zeros_like(W) for W in params.weights],
                               [np.zeros_like(b) for b in params.biases], params.activation)
        assert np.all(net.forward(params, np.zeros((5, 2))) == 0.0)

    @pytest.mark.parametrize("kind, phase", [("sine", 30.0 * 0.15), ("finer", 30.0 * 1.15 * 0.15)])
    def test_single_unit_chain(self, kind, phase):
        params = net.MlpParams([np.array([[0.1, -0.2]]), np.array([[0.7]])],
                               [np.array([0.05]), np.array([0.3])], net.Activation(kind, 30.0))
        y = net.forward(params, np.array([[0.5, -0.25]]))
        assert y.shape == (1, 1)
        assert y[0, 0] == pytest.approx(0.7 * math.sin(phase) + 0.3, abs=1e-14)

    def test_batching_matches_single_rows(self, rng):
        params = net.init_mlp(2, 8, 3, net.Activation(), 1)
        coords = rng.uniform(-1, 1, size=(6, 2))
        rows = np.vstack([net.forward(params, coords[i:i + 1]) for i in range(6)])
        np.testing.assert_allclose(net.forward(params, coords), rows, rtol=1e-12, atol=1e-15)

    def test_accepts_coord_batch(self, rng):
        params = net.init_mlp(1, 4, 1, net.Activation(), 1)
        coords = rng.uniform(-1, 1, size=(3, 2))
        batch = net.CoordBatch.unweighted(coords, np.zeros((3, 1)))
        np.testing.assert_array_equal(net.forward(params, batch), net.forward(params, coords))

    def test_wrong_input_dim(self):
        with pytest.raises(ShapeMismatchError):
            net.forward(net.init_mlp(1, 4, 1, net.Activation(), 0), np.zeros((3, 3)))


class TestCoordBatch:
    def test_validation(self):
        with pytest.raises(ValueError):
            net.CoordBatch.unweighted(np.array([[1.5, 0.0]]), np.zeros((1, 1)))
        with pytest.raises(ShapeMismatchError):
            net.CoordBatch(np.zeros((2, 2)), np.zeros((2, 1)), np.ones((2, 3)))
        assert len(net.CoordBatch.unweighted(np.zeros((4, 2)), np.zeros((4, 3)))) == 4


class TestLossAndGrad:
    def test_zero_at_targets(self, rng):
        params = net.init_mlp(2, 6, 3, net.Activation(), 0)
        coords = rng.uniform(-1, 1, size=(5, 2))
        batch = net.CoordBatch.unweighted(coords, net.forward(params, coords))
        loss, grads = net.loss_and_grad(params, batch, weighted=False)
        assert loss == 0.0
        assert all(np.all(g == 0.0) for g in grads.arrays())

    def test_unweighted_is_per_pixel_mse(self, rng):
        params = net.init_mlp(1, 4, 3, net.Activation(), 0)
        coords = rng.uniform(-1, 1, size=(7, 2))
        targets = rng.random((7, 3))
        loss, _ = net.loss_and_grad(params, net.CoordBatch.unweighted(coords, targets), weighted=False)
        err = net.forward(params, coords) - targets
        assert loss == pytest.approx(np.sum(err ** 2) / 7, rel=1e-13)

    @pytest.mark.parametrize("weighted", [False, True])
    def test_matches_finite_differences(self, weighted):
        for seed in range(20):
            params, batch = _random_case(seed)
            _, grads = net.loss_and_grad(params, batch, weighted)
            for analytic, numeric in zip(grads.arrays(), _finite_difference(params, batch, weighted)):
                scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-2)
                assert np.max(np.abs(analytic - numeric) / scale) < 1e-4, f"seed {seed}"

    def test_unit_weights_reduce_to_mse(self):
        for seed in range(20):
            params, batch = _random_case(seed)
            ones = net.CoordBatch(batch.coords, batch.targets, np.ones_like(batch.targets))
            lw, gw = net.loss_and_grad(params, ones, weighted=True)
            lu, gu = net.loss_and_grad(params, batch, weighted=False)
            assert abs(lw - lu) <= 1e-14
            for a, b in zip(gw.arrays(), gu.arrays()):
                np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)

    @pytest.mark.parametrize("factor", [1e-3, 3.7, 250.0])
    def test_weight_scaling_invariance(self, factor):
        for seed in range(20):
            params, batch = _random_case(seed)
            scaled = net.CoordBatch(batch.coords, batch.targets, batch.weights * factor)
            l1, g1 = net.loss_and_grad(params, batch, weighted=True)
            l2, g2 = net.loss_and_grad(params, scaled, weighted=True)
            assert l2 == pytest.approx(l1, rel=1e-12, abs=1e-15)
            for a, b in zip(g1.arrays(), g2.arrays()):
                np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("channels", [1, 3])
    def test_weighted_is_channel_count_times_per_element_form(self, rng, channels):
        params = net.init_mlp(1, 4, channels, net.Activation(), 0)
        coords = rng.uniform(-1, 1, size=(9, 2))
        targets = rng.random((9, channels))
        weights = rng.uniform(0.05, 1.0, size=targets.shape)
        loss, _ = net.loss_and_grad(params, net.CoordBatch(coords, targets, weights), weighted=True)
        err = net.forward(params, coords) - targets
        assert loss == pytest.approx(channels * np.sum(weights * err ** 2) / np.sum(weights), rel=1e-12)

    def test_zero_weights_are_degenerate(self):
        params, batch = _random_case(0)
        dead = net.CoordBatch(batch.coords, batch.targets, np.zeros_like(batch.targets))
        with pytest.raises(DegenerateMaskError):
            net.loss_and_grad(params, dead, weighted=True)
        net.loss_and_grad(params, dead, weighted=False)


def _scalar_params(theta):
    return net.MlpParams([np.array([[theta]])], [np.array([0.0])])


class TestAdam:
    def test_matches_hand_stepped_quadratic(self):
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        params = _scalar_params(0.0)
        state = net.init_adam(params, lr, b1, b2, eps)
        theta, m, v = 0.0, 0.0, 0.0
        for t in range(1, 4):
            g = 2.0 * (theta - 3.0)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta = theta - lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)

            grad = 2.0 * (params.weights[0] - 3.0)
            grads = net.Grads([grad], [np.zeros(1)])
            params, state = net.adam_step(state, params, grads)
            assert state.t == t
            assert params.weights[0][0, 0] == pytest.approx(theta, abs=1e-12)

    def test_first_step_moves_by_lr(self):
        params = _scalar_params(1.0)
        new, _ = net.adam_step(net.init_adam(params, 1e-3), params,
                               net.Grads([np.array([[42.0]])], [np.zeros(1)]))
        assert new.weights[0][0, 0] == pytest.approx(1.0 - 1e-3, rel=1e-6)

    def test_zero_gradient_is_noop(self):
        params = net.init_mlp(1, 4, 1, net.Activation(), 0)
        grads = net.Grads([np.zeros_like(W) for W in params.weights], [np.zeros_like(b) for b in params.biases])
        new, _ = net.adam_step(net.init_adam(params), params, grads)
        assert all(np.array_equal(a, b) for a, b in zip(_flat(new), _flat(params)))

    def test_inputs_untouched(self):
        params = net.init_mlp(1, 4, 1, net.Activation(), 0)
        before = [a.copy() for a in _flat(params)]
        state = net.init_adam(params)
        grads = net.Grads([np.ones_like(W) for W in params.weights], [np.ones_like(b) for b in params.biases])
        net.adam_step(state, params, grads)
        assert state.t == 0 and all(np.all(m == 0.0) for m in state.m)
        assert all(np.array_equal(a, b) for a, b in zip(_flat(params), before))

    def test_non_finite_gradient(self):
        params = _scalar_params(0.0)
        with pytest.raises(NonFiniteGradientError):
            net.adam_step(net.init_adam(params), params, net.Grads([np.array([[np.nan]])], [np.zeros(1)]))
