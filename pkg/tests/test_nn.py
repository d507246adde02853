import math

import numpy as np
import pytest

from dflsim import data, nn
from dflsim.errors import InputError

import oracles


def small_spec():
    return nn.ModelSpec((4, 5, 3))


class TestSpecAndLayout:
    def test_needs_two_layers(self):
        with pytest.raises(InputError):
            nn.ModelSpec((4,))

    def test_positive_sizes(self):
        with pytest.raises(InputError):
            nn.ModelSpec((4, 0, 2))

    def test_num_params(self):
        assert small_spec().num_params == 4 * 5 + 5 + 5 * 3 + 3

    def test_flatten_unflatten_roundtrip_bit_exact(self):
        spec = small_spec()
        for seed in range(5):
            vec = np.random.default_rng(seed).normal(size=spec.num_params)
            assert np.array_equal(nn.flatten(nn.unflatten(vec, spec)), vec)


class TestInit:
    def test_deterministic(self):
        spec = small_spec()
        assert np.array_equal(nn.init_params(spec, 42), nn.init_params(spec, 42))

    def test_biases_exactly_zero(self):
        spec = small_spec()
        params = nn.init_params(spec, 7)
        for _, b in nn.unflatten(params, spec):
            assert np.all(b == 0.0)

    def test_weight_bounds(self):
        spec = nn.ModelSpec((30, 20))
        W, _ = nn.unflatten(nn.init_params(spec, 3), spec)[0]
        limit = math.sqrt(6.0 / 50)
        assert np.abs(W).max() <= limit

    def test_weight_mean_statistics(self):
        # Uniform(-l, l) has std l/sqrt(3); the empirical mean of N draws
        # should land within 3 sigma / sqrt(N) of zero.
        spec = nn.ModelSpec((784, 64))
        W, _ = nn.unflatten(nn.init_params(spec, 123), spec)[0]
        limit = math.sqrt(6.0 / (784 + 64))
        tolerance = 3.0 * (limit / math.sqrt(3.0)) / math.sqrt(W.size)
        assert abs(W.mean()) < tolerance


class TestForward:
    def test_zero_params_uniform_probs(self):
        spec = small_spec()
        logits, _ = nn.forward(np.zeros(spec.num_params), spec, np.zeros((2, 4)))
        _, probs = nn.softmax_cross_entropy(logits, np.array([0, 1]))
        np.testing.assert_allclose(probs, np.full((2, 3), 1.0 / 3.0), atol=1e-12)

    def test_hand_computed_logits(self):
        # 2-2-2 net: identity first layer, second layer doubles and swaps.
        spec = nn.ModelSpec((2, 2, 2))
        W0 = np.eye(2)
        b0 = np.zeros(2)
        W1 = np.array([[0.0, 2.0], [2.0, 0.0]])
        b1 = np.array([1.0, -1.0])
        params = nn.flatten([(W0, b0), (W1, b1)])
        logits, _ = nn.forward(params, spec, np.array([[3.0, -2.0]]))
        # hidden = relu([3, -2]) = [3, 0]; logits = [3*0 + 0*2 + 1, 3*2 + 0 - 1]
        np.testing.assert_allclose(logits, [[1.0, 5.0]], atol=1e-12)

    def test_loss_matches_scalar_reimplementation(self):
        spec = small_spec()
        rng = np.random.default_rng(17)
        params = nn.init_params(spec, 17)
        X = rng.normal(size=(5, 4))
        y = rng.integers(0, 3, size=5)
        logits, _ = nn.forward(params, spec, X)
        loss, _ = nn.softmax_cross_entropy(logits, y)
        expected = 0.0
        for row, label in zip(logits, y):
            denominator = sum(math.exp(v) for v in row)
            expected += -math.log(math.exp(row[label]) / denominator)
        expected /= len(y)
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_uniform_predictor_loss_is_log_classes(self):
        spec = small_spec()
        logits, _ = nn.forward(np.zeros(spec.num_params), spec, np.ones((4, 4)))
        loss, _ = nn.softmax_cross_entropy(logits, np.array([0, 1, 2, 0]))
        assert loss == pytest.approx(math.log(3), abs=1e-9)

    def test_feature_mismatch_rejected(self):
        with pytest.raises(InputError):
            nn.forward(np.zeros(small_spec().num_params), small_spec(), np.zeros((2, 3)))


class TestBackward:
    def test_saturated_output_gradient_is_tiny(self):
        # Drive the correct logit far above the rest: gradients vanish.
        spec = nn.ModelSpec((2, 2))
        W = np.array([[30.0, -30.0], [30.0, -30.0]])
        b = np.zeros(2)
        params = nn.flatten([(W, b)])
        X = np.array([[1.0, 1.0]])
        y = np.array([0])
        logits, cache = nn.forward(params, spec, X)
        grad = nn.backward(params, spec, X, y, cache)
        assert np.abs(grad).max() < 1e-20

    def test_finite_difference_check(self):
        shapes = [(4, 2), (3, 4, 3), (5, 7, 4), (2, 3, 3, 2), (6, 8, 3)]
        checked = 0
        seed = 0
        while checked < 10:
            shape = shapes[seed % len(shapes)]
            spec = nn.ModelSpec(shape)
            assert spec.num_params <= 100
            rng = np.random.default_rng(seed)
            params = nn.init_params(spec, seed) + 0.05 * rng.normal(size=spec.num_params)
            X = rng.normal(size=(6, shape[0]))
            y = rng.integers(0, shape[-1], size=6)
            _, cache = nn.forward(params, spec, X)
            _, preacts = cache
            seed += 1
            if len(preacts) > 1 and min(float(np.abs(z).min()) for z in preacts[:-1]) < 1e-3:
                # Finite differences straddle the ReLU kink; skip this draw.
                continue
            g_bp = nn.backward(params, spec, X, y, cache)
            g_fd = oracles.finite_difference_grad(params, spec, X, y, step=1e-5)
            scale = np.maximum.reduce([np.abs(g_bp), np.abs(g_fd), np.full_like(g_bp, 1e-6)])
            assert np.max(np.abs(g_bp - g_fd) / scale) < 1e-4
            checked += 1

    def test_duplicated_batch_same_gradient(self):
        spec = small_spec()
        rng = np.random.default_rng(2)
        params = nn.init_params(spec, 2)
        X = rng.normal(size=(3, 4))
        y = np.array([0, 1, 2])
        _, cache = nn.forward(params, spec, X)
        g1 = nn.backward(params, spec, X, y, cache)
        X2, y2 = np.vstack([X, X]), np.concatenate([y, y])
        _, cache2 = nn.forward(params, spec, X2)
        g2 = nn.backward(params, spec, X2, y2, cache2)
        np.testing.assert_allclose(g1, g2, atol=1e-12)


class TestLocalTrain:
    def test_zero_learning_rate_is_identity(self):
        spec = small_spec()
        params = nn.init_params(spec, 5)
        ds = data.synth_blobs(3, 10, 4, 0.3, seed=5)
        cfg = nn.TrainConfig(learning_rate=0.0, batch_size=8, local_epochs=3, seed=1)
        out = nn.local_train(params, spec, ds.features, ds.labels, cfg)
        assert np.array_equal(out, params)

    def test_converges_on_separable_blobs(self):
        ds = data.synth_blobs(2, 60, 4, 0.2, seed=9)
        spec = nn.ModelSpec((4, 8, 2))
        params = nn.init_params(spec, 9)
        cfg = nn.TrainConfig(learning_rate=0.1, batch_size=16, local_epochs=50, seed=9)
        trained = nn.local_train(params, spec, ds.features, ds.labels, cfg)
        metrics = nn.evaluate(trained, spec, ds.features, ds.labels)
        assert metrics.accuracy >= 0.95

    def test_deterministic(self):
        ds = data.synth_blobs(3, 20, 4, 0.4, seed=4)
        spec = small_spec()
        params = nn.init_params(spec, 4)
        cfg = nn.TrainConfig(learning_rate=0.05, batch_size=16, local_epochs=2, seed=11)
        a = nn.local_train(params, spec, ds.features, ds.labels, cfg)
        b = nn.local_train(params, spec, ds.features, ds.labels, cfg)
        assert np.array_equal(a, b)

    def test_empty_shard_rejected(self):
        spec = small_spec()
        with pytest.raises(InputError):
            nn.local_train(
                nn.init_params(spec, 1),
                spec,
                np.empty((0, 4)),
                np.empty(0, dtype=int),
                nn.TrainConfig(learning_rate=0.1),
            )


class TestEvaluate:
    def test_all_correct(self):
        # A linear layer that copies the one-hot feature wins every example.
        spec = nn.ModelSpec((3, 3))
        params = nn.flatten([(10.0 * np.eye(3), np.zeros(3))])
        X = np.eye(3)
        y = np.array([0, 1, 2])
        metrics = nn.evaluate(params, spec, X, y)
        assert metrics.macro_f1 == 1.0
        assert metrics.accuracy == 1.0

    def test_hand_confusion_matrix(self):
        # Two examples: labels (0, 1), predictions (1, 1).
        # class 0: F1 = 0; class 1: precision 1/2, recall 1 -> F1 = 2/3.
        spec = nn.ModelSpec((2, 2))
        params = nn.flatten([(np.array([[0.0, 1.0], [0.0, 1.0]]), np.zeros(2))])
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        y = np.array([0, 1])
        metrics = nn.evaluate(params, spec, X, y)
        assert metrics.f1[0] == 0.0
        assert metrics.f1[1] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert metrics.macro_f1 == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_constant_predictor_on_balanced_classes(self):
        # Always predicting class 0 on a balanced 3-class set gives
        # macro-F1 = (2 / (1 + 3)) / 3.
        spec = nn.ModelSpec((2, 3))
        params = nn.flatten([(np.zeros((2, 3)), np.array([1.0, 0.0, 0.0]))])
        X = np.zeros((9, 2))
        y = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
        metrics = nn.evaluate(params, spec, X, y)
        assert metrics.macro_f1 == pytest.approx((2.0 / 4.0) / 3.0, abs=1e-12)

    def test_weighted_average_mode(self):
        spec = nn.ModelSpec((2, 2))
        params = nn.flatten([(np.array([[1.0, 0.0], [0.0, 1.0]]), np.zeros(2))])
        X = np.array([[1.0, 0.0]] * 3 + [[0.0, 1.0]])
        y = np.array([0, 0, 0, 1])
        metrics = nn.evaluate(params, spec, X, y)
        expected = float(np.sum(metrics.f1 * np.array([3, 1])) / 4)
        assert metrics.weighted_f1 == pytest.approx(expected, abs=1e-12)
        assert metrics.f1_average("weighted") == metrics.weighted_f1

    def test_empty_test_set_rejected(self):
        spec = small_spec()
        with pytest.raises(InputError):
            nn.evaluate(nn.init_params(spec, 0), spec, np.empty((0, 4)), np.empty(0, dtype=int))
