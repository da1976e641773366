import numpy as np
import pytest

from frameverify.app.neural import (
    DenseLayer,
    TrainConfig,
    add_l2,
    cross_entropy,
    cross_entropy_grad,
    dense_backward,
    dense_forward,
    dropout_mask,
    grad_check,
    gumbel_softmax,
    l2_penalty,
    relu,
    relu_backward,
    sgd_step,
    softmax,
    softmax_backward,
)


def _plain_sgd(**overrides):
    values = {"learning_rate": 1.0, "momentum": 0.0, "decay": 0.0}
    values.update(overrides)
    return TrainConfig(**values)


class TestRelu:
    def test_clamps_negatives(self):
        np.testing.assert_array_equal(relu(np.array([-2.0, 0.0, 3.0])), [0.0, 0.0, 3.0])

    def test_backward_masks_inactive_units(self):
        grad = relu_backward(np.array([-1.0, 0.0, 2.0]), np.array([5.0, 5.0, 5.0]))
        np.testing.assert_array_equal(grad, [0.0, 0.0, 5.0])


class TestSoftmax:
    def test_sums_to_one_and_shift_invariant(self):
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(softmax(x).sum(), 1.0)
        np.testing.assert_allclose(softmax(x), softmax(x + 100.0))

    def test_large_logits_do_not_overflow(self):
        probs = softmax(np.array([1000.0, 0.0]))
        assert np.all(np.isfinite(probs))
        assert probs[0] == pytest.approx(1.0)

    def test_rows_of_a_matrix(self):
        probs = softmax(np.zeros((4, 2)))
        np.testing.assert_allclose(probs, 0.5)

    def test_empty(self):
        with pytest.raises(ValueError):
            softmax(np.array([]))

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        x, weights = rng.normal(size=4), rng.normal(size=4)
        analytic = softmax_backward(softmax(x), weights)
        eps = 1e-6
        numeric = [
            (softmax(x + eps * np.eye(4)[i]) @ weights - softmax(x - eps * np.eye(4)[i]) @ weights) / (2 * eps)
            for i in range(4)
        ]
        np.testing.assert_allclose(analytic, numeric, atol=1e-8)


class TestGumbelSoftmax:
    @pytest.mark.parametrize("seed", [7, 8, 9])
    def test_argmax_frequencies_follow_softmax(self, seed):
        rng = np.random.default_rng(seed)
        logits = rng.normal(scale=1.5, size=3)
        samples, _ = gumbel_softmax(np.tile(logits, (100_000, 1)), tau=1.0, rng=rng)
        frequencies = np.bincount(samples.argmax(axis=1), minlength=3) / len(samples)
        np.testing.assert_allclose(frequencies, softmax(logits), atol=0.01)

    def test_low_temperature_with_clear_winner_is_one_hot(self):
        rng = np.random.default_rng(11)
        samples, _ = gumbel_softmax(np.tile([5.0, 0.0], (10_000, 1)), tau=0.05, rng=rng)
        assert np.mean(samples.max(axis=1) > 0.95) >= 0.99

    @pytest.mark.parametrize("tau, share", [(0.05, 0.85), (0.002, 0.99)])
    def test_low_temperature_is_nearly_one_hot(self, tau, share):
        rng = np.random.default_rng(11)
        samples, _ = gumbel_softmax(np.zeros((20_000, 3)), tau=tau, rng=rng)
        assert np.mean(samples.max(axis=1) > 0.95) >= share

    def test_frozen_noise_is_reproducible(self):
        logits = np.array([[0.2, -0.4], [1.0, 0.5]])
        first, noise = gumbel_softmax(logits, tau=0.5, rng=np.random.default_rng(3))
        second, _ = gumbel_softmax(logits, tau=0.5, noise=noise)
        np.testing.assert_array_equal(first, second)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            gumbel_softmax(np.zeros(2), tau=0.0, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            gumbel_softmax(np.zeros(2), tau=1.0)


class TestDense:
    def test_inconsistent_shapes(self):
        with pytest.raises(ValueError):
            DenseLayer(np.zeros((2, 3)), np.zeros(3))

    def test_wrong_input_size(self):
        with pytest.raises(ValueError):
            dense_forward(DenseLayer.zeros(3, 2), np.ones(4))

    def test_batched_backward_accumulates_per_row_gradients(self):
        rng = np.random.default_rng(2)
        batched = DenseLayer.glorot(3, 2, rng)
        single = DenseLayer(batched.W, batched.b)
        x, g = rng.normal(size=(4, 3)), rng.normal(size=(4, 2))
        grad_x = dense_backward(batched, x, g)
        for row in range(4):
            dense_backward(single, x[row], g[row])
        np.testing.assert_allclose(batched.grad_W, single.grad_W)
        np.testing.assert_allclose(batched.grad_b, single.grad_b)
        np.testing.assert_allclose(grad_x, g @ batched.W)


class TestDropout:
    def test_eval_mode_is_identity(self):
        np.testing.assert_array_equal(dropout_mask((5,), 0.5, None, training=False), np.ones(5))

    def test_inverted_scaling_keeps_expectation(self):
        mask = dropout_mask((100_000,), 0.5, np.random.default_rng(0))
        assert set(np.unique(mask)) == {0.0, 2.0}
        assert mask.mean() == pytest.approx(1.0, abs=0.02)

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            dropout_mask((2,), 1.0, np.random.default_rng(0))


class TestCrossEntropy:
    def test_value(self):
        assert cross_entropy(np.array([0.2, 0.8]), 1) == pytest.approx(-np.log(0.8))

    def test_zero_probability_is_floored(self):
        assert np.isfinite(cross_entropy(np.array([1.0, 0.0]), 1))

    def test_target_out_of_range(self):
        with pytest.raises(ValueError):
            cross_entropy(np.array([0.5, 0.5]), 2)

    def test_gradient_is_probs_minus_one_hot(self):
        np.testing.assert_allclose(cross_entropy_grad(np.array([0.2, 0.3, 0.5]), 2), [0.2, 0.3, -0.5])
        np.testing.assert_allclose(
            cross_entropy_grad(np.array([[0.4, 0.6], [0.9, 0.1]]), [1, 0]), [[0.4, -0.4], [-0.1, 0.1]]
        )


class TestSGD:
    def test_zero_learning_rate_leaves_weights(self):
        layer = DenseLayer(np.ones((2, 2)), np.ones(2))
        layer.grad_W += 3.0
        sgd_step([layer], _plain_sgd(learning_rate=0.0), step_count=0)
        np.testing.assert_array_equal(layer.W, np.ones((2, 2)))
        np.testing.assert_array_equal(layer.grad_W, np.zeros((2, 2)))

    def test_l2_shrinks_weights_not_biases(self):
        layer = DenseLayer(np.ones((2, 2)), np.ones(2))
        add_l2([layer], 0.1)
        sgd_step([layer], _plain_sgd(learning_rate=0.5), step_count=0)
        np.testing.assert_allclose(layer.W, 0.95)
        np.testing.assert_array_equal(layer.b, np.ones(2))
        assert l2_penalty([DenseLayer(np.full((1, 2), 2.0), np.zeros(1))], 0.5) == pytest.approx(2.0)

    def test_learning_rate_decay(self):
        layer = DenseLayer.zeros(2, 1)
        layer.grad_W += 1.0
        sgd_step([layer], _plain_sgd(decay=1.0), step_count=3)
        np.testing.assert_allclose(layer.W, -0.25)

    def test_momentum_accumulates(self):
        layer = DenseLayer.zeros(1, 1)
        config = _plain_sgd(momentum=0.5)
        for step in range(2):
            layer.grad_W += 1.0
            sgd_step([layer], config, step)
        np.testing.assert_allclose(layer.W, [[-2.5]])


class TestGradCheck:
    @staticmethod
    def _quadratic(layer, factor):
        def closure():
            layer.grad_W += factor * layer.W
            layer.grad_b += factor * layer.b
            return float(np.sum(layer.W**2) + np.sum(layer.b**2))

        return closure

    def test_accepts_correct_gradient(self):
        rng = np.random.default_rng(4)
        layer = DenseLayer(rng.normal(size=(2, 3)), rng.normal(size=2))
        assert grad_check(self._quadratic(layer, 2.0), [layer]) < 1e-6
        np.testing.assert_array_equal(layer.grad_W, 0.0)

    def test_detects_wrong_gradient(self):
        rng = np.random.default_rng(4)
        layer = DenseLayer(rng.normal(size=(2, 3)), rng.normal(size=2))
        assert grad_check(self._quadratic(layer, 3.0), [layer]) > 0.1

    def test_sampled_coordinates(self):
        rng = np.random.default_rng(5)
        layer = DenseLayer(rng.normal(size=(4, 4)), rng.normal(size=4))
        assert grad_check(self._quadratic(layer, 2.0), [layer], max_coords=5) < 1e-6
