import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from neural.exceptions import CheckpointFormatError, NonFiniteGradient
from neural.utils.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from neural.utils.gradcheck import grad_check
from neural.utils.mlp import MlpParams, init_mlp, kink_margin, mlp_backward, mlp_forward
from neural.utils.optim import AdamState, adam_step, clip_by_global_norm
from neural.utils.schedule import TrainConfig, lr_at
from neural.utils.standardizer import Standardizer
from sim_core.exceptions import ContractViolation


def mlp_loss(sizes, x, weights):
    """Loss sum(out * weights) over a net given as blocks, with analytic gradients."""
    def loss_fn(blocks):
        params = MlpParams.from_blocks(blocks)
        out, tape = mlp_forward(params, x)
        grads, _ = mlp_backward(params, tape, weights)
        return float(np.sum(out * weights)), grads
    return loss_fn


class MlpForwardTests(SimpleTestCase):

    def test_zero_weights_output_bias(self):
        params = MlpParams(weights=(np.zeros((3, 4)), np.zeros((2, 3))), biases=(np.zeros(3), np.array([0.5, -2.0])))
        out, _ = mlp_forward(params, np.array([1.0, -3.0, 2.0, 7.0]))
        assert_array_equal(out, [0.5, -2.0])

    def test_single_linear_layer_identity(self):
        params = MlpParams(weights=(np.eye(3),), biases=(np.zeros(3),))
        x = np.array([-1.0, 0.25, 4.0])
        out, _ = mlp_forward(params, x)
        assert_array_equal(out, x)

    def test_two_layer_hand_computed(self):
        params = MlpParams(
            weights=(np.array([[1.0, -1.0], [2.0, 0.0]]), np.array([[1.0, 1.0]])),
            biases=(np.array([0.0, -1.0]), np.array([0.5])),
        )
        out, _ = mlp_forward(params, np.array([1.0, 2.0]))
        assert_allclose(out, [1.5])

    def test_leading_batch_dimensions(self):
        params = init_mlp([4, 8, 2], np.random.default_rng(3))
        x = np.random.default_rng(4).normal(size=(5, 3, 4))
        out, _ = mlp_forward(params, x)
        self.assertEqual(out.shape, (5, 3, 2))
        single, _ = mlp_forward(params, x[2, 1])
        assert_allclose(out[2, 1], single, rtol=1e-12, atol=1e-14)

    def test_width_mismatch(self):
        params = init_mlp([4, 2], np.random.default_rng(0))
        with self.assertRaises(ContractViolation):
            mlp_forward(params, np.zeros(5))

    def test_layer_chain_validated(self):
        with self.assertRaises(ContractViolation):
            MlpParams(weights=(np.zeros((3, 4)), np.zeros((2, 5))), biases=(np.zeros(3), np.zeros(2)))

    def test_glorot_bounds(self):
        params = init_mlp([10, 6], np.random.default_rng(1))
        self.assertLessEqual(np.abs(params.weights[0]).max(), np.sqrt(6.0 / 16.0))
        assert_array_equal(params.biases[0], np.zeros(6))


class MlpBackwardTests(SimpleTestCase):

    def test_zero_output_gradient(self):
        params = init_mlp([3, 5, 2], np.random.default_rng(0))
        _, tape = mlp_forward(params, np.array([0.3, -0.2, 1.0]))
        grads, grad_in = mlp_backward(params, tape, np.zeros(2))
        for g in grads.values():
            self.assertFalse(np.any(g))
        self.assertFalse(np.any(grad_in))

    def test_linear_weight_gradient_is_outer_product(self):
        params = MlpParams(weights=(np.array([[1.0, 2.0], [3.0, 4.0], [0.5, 0.0]]),), biases=(np.zeros(3),))
        x = np.array([0.7, -1.1])
        g = np.array([1.0, -2.0, 0.5])
        _, tape = mlp_forward(params, x)
        grads, grad_in = mlp_backward(params, tape, g)
        assert_allclose(grads['W0'], np.outer(g, x))
        assert_allclose(grads['b0'], g)
        assert_allclose(grad_in, params.weights[0].T @ g)

    def test_random_net_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        sizes = [6, 12, 8, 3]
        params = init_mlp(sizes, rng)
        x = rng.normal(size=(4, 6))
        weights = rng.normal(size=(4, 3))
        report = grad_check(params.blocks(), mlp_loss(sizes, x, weights), tolerance=1e-4, n_samples=80,
                            rng=np.random.default_rng(0))
        self.assertTrue(report.passed, report)

    def test_stale_tape(self):
        rng = np.random.default_rng(0)
        first = init_mlp([3, 4, 1], rng)
        second = init_mlp([3, 4, 1], rng)
        _, tape = mlp_forward(first, np.ones(3))
        with self.assertRaises(ContractViolation):
            mlp_backward(second, tape, np.ones(1))


class ScheduleTests(SimpleTestCase):

    def test_step_decay(self):
        cfg = TrainConfig()
        self.assertAlmostEqual(lr_at(cfg, 0), 1e-3)
        self.assertAlmostEqual(lr_at(cfg, 2499), 1e-3)
        self.assertAlmostEqual(lr_at(cfg, 2500), 5e-4)
        self.assertAlmostEqual(lr_at(cfg, 7500), 1.25e-4)

    def test_negative_iteration(self):
        with self.assertRaises(ValueError):
            lr_at(TrainConfig(), -1)

    def test_config_rejects_unknown_field(self):
        with self.assertRaises(ValueError):
            TrainConfig.from_dict({'momentum': 0.9})


class AdamTests(SimpleTestCase):

    def test_zero_gradients_leave_params(self):
        params = {'w': np.array([1.0, -2.0])}
        state = AdamState.for_blocks(params)
        new, state = adam_step(params, {'w': np.zeros(2)}, state, 1e-3)
        assert_array_equal(new['w'], params['w'])
        self.assertEqual(state.step_count, 1)

    def test_first_step_magnitude_is_rate(self):
        params = {'w': np.array([0.0])}
        new, _ = adam_step(params, {'w': np.array([1.0])}, AdamState.for_blocks(params), 1e-3)
        assert_allclose(new['w'], [-1e-3], rtol=1e-6)

    def test_repeated_gradients_step_at_rate(self):
        params = {'w': np.array([0.0])}
        state = AdamState.for_blocks(params)
        previous = params['w']
        for _ in range(200):
            params, state = adam_step(params, {'w': np.array([-3.0])}, state, 1e-2)
            update = params['w'] - previous
            previous = params['w']
        assert_allclose(update, [1e-2], rtol=1e-6)

    def test_non_finite_gradient_names_block(self):
        params = {'f_rel.W0': np.zeros(2), 'f_dyn.b3': np.zeros(1)}
        grads = {'f_rel.W0': np.zeros(2), 'f_dyn.b3': np.array([np.nan])}
        with self.assertRaises(NonFiniteGradient) as ctx:
            adam_step(params, grads, AdamState.for_blocks(params), 1e-3)
        self.assertEqual(ctx.exception.block, 'f_dyn.b3')

    def test_clip_by_global_norm(self):
        clipped, norm = clip_by_global_norm({'a': np.array([3.0]), 'b': np.array([4.0])}, 1.0)
        self.assertAlmostEqual(norm, 5.0)
        assert_allclose(clipped['a'], [0.6])
        assert_allclose(clipped['b'], [0.8])
        untouched, _ = clip_by_global_norm({'a': np.array([0.1])}, 5.0)
        assert_array_equal(untouched['a'], [0.1])


class GradCheckTests(SimpleTestCase):

    def test_least_squares_exact(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(20, 5))
        y = rng.normal(size=20)

        def loss_fn(blocks):
            residual = a @ blocks['w'] - y
            return float(residual @ residual), {'w': 2.0 * a.T @ residual}

        report = grad_check({'w': rng.normal(size=5)}, loss_fn, tolerance=1e-8, eps=1e-5)
        self.assertTrue(report.passed, report)
        self.assertEqual(report.n_checked, 5)

    def test_gradient_away_from_relu_kinks(self):
        rng = np.random.default_rng(11)
        params = init_mlp([4, 16, 2], rng)
        x = rng.uniform(-1.0, 1.0, size=4)
        z = params.weights[0] @ x
        # shift biases so every hidden pre-activation sits at least 1e-3 from its kink
        offset = np.where(z >= 0, 1.0, -1.0) * np.maximum(np.abs(z), 1e-3) - z
        params = MlpParams(weights=params.weights, biases=(offset, params.biases[1]))
        _, tape = mlp_forward(params, x)
        self.assertGreaterEqual(kink_margin(tape), 1e-3 - 1e-15)

        report = grad_check(params.blocks(), mlp_loss([4, 16, 2], x, np.array([1.0, -0.5])),
                            n_samples=200, eps=1e-6)
        self.assertTrue(report.passed, report)


class StandardizerTests(SimpleTestCase):

    def test_round_trip(self):
        data = np.random.default_rng(0).normal(3.0, 0.01, size=(50, 4))
        standardizer = Standardizer.fit(data)
        assert_allclose(standardizer.invert(standardizer.apply(data)), data, atol=1e-10)

    def test_scale_only_keeps_zero(self):
        standardizer = Standardizer.fit(np.random.default_rng(1).normal(2.0, 1.0, size=(30, 3)), scale_only=True)
        assert_array_equal(standardizer.invert(np.zeros(3)), np.zeros(3))

    def test_constant_column_floor(self):
        standardizer = Standardizer.fit(np.ones((10, 2)))
        assert_array_equal(standardizer.std, [1e-8, 1e-8])

    def test_identity_columns(self):
        data = np.random.default_rng(2).normal(5.0, 3.0, size=(40, 3))
        standardizer = Standardizer.fit(data, identity_columns=[2])
        self.assertEqual(standardizer.mean[2], 0.0)
        self.assertEqual(standardizer.std[2], 1.0)


class CheckpointTests(SimpleTestCase):

    def setUp(self):
        self.blocks = {'f_rel.W0': np.arange(6.0).reshape(2, 3) / 7.0, 'f_rel.b0': np.array([0.1, -0.2])}
        self.metadata = {'kind': 'IN', 'seed': 3, 'loss_curve': [[0, 1.5]]}

    def test_round_trip_bytes(self):
        blocks, metadata = decode_checkpoint(encode_checkpoint(self.blocks, self.metadata))
        self.assertEqual(list(blocks), list(self.blocks))
        for name in self.blocks:
            assert_array_equal(blocks[name], self.blocks[name])
        self.assertEqual(metadata, self.metadata)

    def test_save_and_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'nested' / 'model.ckpt'
            digest = save_checkpoint(path, self.blocks, self.metadata)
            self.assertEqual(len(digest), 64)
            blocks, _ = load_checkpoint(path)
            assert_array_equal(blocks['f_rel.W0'], self.blocks['f_rel.W0'])

    def test_truncated_blob(self):
        data = encode_checkpoint(self.blocks, self.metadata)
        with self.assertRaises(CheckpointFormatError):
            decode_checkpoint(data[:-8])

    def test_header_prefix_is_little_endian_length(self):
        data = encode_checkpoint(self.blocks)
        length = int.from_bytes(data[:8], 'little')
        self.assertEqual(data[8 + length:8 + length + 8], np.float64(0.0).tobytes())
