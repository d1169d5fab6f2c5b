import math
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from dynamics_models.exceptions import TrainingDiverged
from dynamics_models.utils.checkpoints import load_model, save_model
from dynamics_models.utils.features import (
    DYN_EFFECT,
    IN,
    SAIN,
    FeatureCodec,
    ObjectState,
    encode_actions,
    pair_indices,
)
from dynamics_models.utils.interaction_network import (
    in_step,
    init_model,
    model_step,
    sain_step,
    widen_in_to_sain,
    zero_model,
)
from dynamics_models.utils.loss import data_loss_and_grads, trajectory_loss
from dynamics_models.utils.nominal import NominalEngine
from dynamics_models.utils.rollout import (
    LearnedModel,
    PhysicsModel,
    rollout_arrays,
    rollout_backward,
    rollout_model,
    rollout_signature,
)
from dynamics_models.utils.training import build_windows, fine_tune, fit_codec, train, windows_loss
from neural.exceptions import CheckpointFormatError
from neural.utils.checkpoint import save_checkpoint
from neural.utils.gradcheck import grad_check
from neural.utils.schedule import TrainConfig
from neural.utils.standardizer import Standardizer
from scenario.utils.records import Dataset, ShadowWindow, TrajectoryRecord
from sim_core.exceptions import ContractViolation
from sim_core.utils.batch import WorldBatch
from sim_core.utils.engine import rollout_physics
from sim_core.utils.state import (
    DiskState,
    Pose2,
    PusherState,
    SimConfig,
    SurfaceModel,
    Twist2,
    WorldState,
)

DT = 1.0 / 240.0
R1, R2, RP = 0.0525, 0.058, 0.0048
SMALL_HIDDEN = (24, 12)


def make_world(disks, pusher_position=(-1.0, -1.0), mu=0.15):
    """disks: iterable of (x, y, theta, vx, vy, omega, mass, radius)."""
    return WorldState(
        disks=tuple(
            DiskState(pose=Pose2(x, y, th), twist=Twist2(vx, vy, w), mass=m, radius=r)
            for x, y, th, vx, vy, w, m, r in disks
        ),
        pusher=PusherState(position=pusher_position, radius=RP),
        surface=SurfaceModel(mu_nominal=mu),
    )


def two_disk_world(offset=0.0):
    return make_world(
        [(0.0, 0.0, 0.0, 0, 0, 0, 0.9, R1),
         (R1 + R2 + 1e-3, offset, 0.0, 0, 0, 0, 1.1, R2)],
        pusher_position=(-(R1 + RP), 0.0),
    )


def pushing_trajectory(steps=24, heading=0.0, offset=0.0, speed=0.05):
    plan = np.tile([speed * math.cos(heading), speed * math.sin(heading)], (steps, 1))
    return rollout_physics(two_disk_world(offset), plan, SimConfig())


def pushing_dataset(n=4, steps=24):
    records = [
        TrajectoryRecord(index=i, trajectory=pushing_trajectory(steps, heading=0.1 * (i - n / 2), offset=0.004 * i))
        for i in range(n)
    ]
    return Dataset(metadata={'dt': DT}, records=records)


def sliding_dataset(n, mu, seed, steps=24):
    """Two nominal disks coasting apart on a uniform surface, pusher parked far away."""
    rng = np.random.default_rng(seed)
    records = []
    for index in range(n):
        headings = rng.uniform(-0.3, 0.3, size=2)
        speeds = rng.uniform(0.09, 0.12, size=2)
        world = make_world(
            [(0.0, 0.0, 0.0, speeds[0] * math.cos(headings[0]), speeds[0] * math.sin(headings[0]), 0, 0.896, R1),
             (0.0, rng.uniform(0.25, 0.35), 0.0,
              speeds[1] * math.cos(headings[1]), speeds[1] * math.sin(headings[1]), 0, 1.1, R2)],
            mu=mu,
        )
        records.append(TrajectoryRecord(index=index, trajectory=rollout_physics(world, np.zeros((steps, 2)), SimConfig())))
    return Dataset(metadata={'dt': DT}, records=records)


def off_center_dataset(angles, steps=24, speed=0.05):
    """
    Pushes along +x that meet disk 1 at contact angle +a and -a.

    The pusher starts tangent to the disk; mirrored angles give the same
    action encoding and object states, so only the pusher's position tells
    them apart. Disk 2 rests out of reach. Nominal masses and friction.
    """
    angles = np.concatenate([angles, -np.asarray(angles)])
    records = []
    for index, angle in enumerate(angles):
        world = make_world(
            [(0.0, 0.0, 0.0, 0, 0, 0, 0.896, R1), (0.0, 0.4, 0.0, 0, 0, 0, 1.1, R2)],
            pusher_position=(-(R1 + RP) * math.cos(angle), -(R1 + RP) * math.sin(angle)),
        )
        plan = np.tile([speed, 0.0], (steps, 1))
        records.append(TrajectoryRecord(index=index, trajectory=rollout_physics(world, plan, SimConfig())))
    return Dataset(metadata={'dt': DT}, records=records)


def mean_position_error(model, dataset, horizon, objects=slice(None)):
    """Mean position error (m) of ``horizon``-step predictions from each trajectory's first state."""
    errors = []
    for record in dataset.records:
        trajectory = record.trajectory
        predicted = model.predict(trajectory.batch_at(0), trajectory.pusher_pos[:horizon + 1, None])
        gap = predicted['pose'][horizon, 0, objects, :2] - trajectory.pose[horizon, objects, :2]
        errors.append(np.linalg.norm(gap, axis=-1))
    return float(np.mean(errors))


def random_state(rng, batch=2, n=3):
    return ObjectState(
        pos=rng.uniform(-0.2, 0.2, size=(batch, n, 2)),
        theta=rng.uniform(-math.pi, math.pi, size=(batch, n)),
        vel=rng.normal(scale=0.05, size=(batch, n, 3)),
        mass=rng.uniform(0.8, 1.2, size=(batch, n)),
        radius=rng.uniform(0.05, 0.06, size=(batch, n)),
    )


class FeatureTests(SimpleTestCase):

    def test_pair_order_is_receiver_major(self):
        receivers, senders = pair_indices(3)
        assert_array_equal(receivers, [0, 0, 1, 1, 2, 2])
        assert_array_equal(senders, [1, 2, 0, 2, 0, 1])

    def test_action_goes_to_touched_disk_only(self):
        pos = np.array([[[0.0, 0.0], [0.2, 0.0]]])
        radius = np.array([[R1, R2]])
        start = np.array([[-(R1 + RP) - 1e-4, 0.0]])
        end = start + np.array([[DT * 0.05, 0.0]])
        actions = encode_actions(pos, radius, start, end, RP, DT)
        assert_allclose(actions[0, 0], [0.05, 0.0])
        assert_array_equal(actions[0, 1], [0.0, 0.0])

    def test_distant_pusher_gives_no_action(self):
        pos = np.zeros((1, 1, 2))
        actions = encode_actions(pos, np.array([[R1]]), np.array([[0.5, 0.5]]), np.array([[0.6, 0.5]]), RP, DT)
        assert_array_equal(actions, np.zeros((1, 1, 2)))

    def test_codec_requires_scale_only_output(self):
        codec = FeatureCodec.identity(IN)
        with self.assertRaises(ContractViolation):
            FeatureCodec(kind=IN, rel_in=codec.rel_in, dyn_in=codec.dyn_in,
                         dyn_out=Standardizer(mean=np.ones(3), std=np.ones(3)))
        with self.assertRaises(ContractViolation):
            FeatureCodec(kind=SAIN, rel_in=codec.rel_in, dyn_in=codec.dyn_in, dyn_out=codec.dyn_out)


class StepTests(SimpleTestCase):

    def setUp(self):
        self.world = make_world([
            (0.0, 0.0, 0.3, 0.1, -0.02, 0.5, 0.9, R1),
            (0.2, 0.05, -1.0, 0.0, 0.03, 0.0, 1.1, R2),
        ])

    def assert_constant_velocity(self, before, after):
        for old, new in zip(before.disks, after.disks):
            assert_array_equal(new.twist.as_array(), old.twist.as_array())
            expected = old.pose.as_array()[:2] + DT * old.twist.as_array()[:2]
            assert_allclose(new.pose.as_array()[:2], expected, rtol=0, atol=1e-15)
            self.assertEqual(new.mass, old.mass)
            self.assertEqual(new.radius, old.radius)

    def test_zero_weights_in_keeps_velocity(self):
        nxt = in_step(self.world, np.zeros((2, 2)), zero_model(IN))
        self.assert_constant_velocity(self.world, nxt)

    def test_zero_weights_sain_ignores_engine(self):
        moved = make_world([
            (0.01, 0.0, 0.3, 0.5, 0.0, 0.0, 0.9, R1),
            (0.2, 0.05, -1.0, 0.0, 0.3, 2.0, 1.1, R2),
        ])
        nxt = sain_step(self.world, self.world, moved, np.zeros((2, 2)), zero_model(SAIN))
        self.assert_constant_velocity(self.world, nxt)

    def test_euler_identity_and_statics(self):
        rng = np.random.default_rng(3)
        params = init_model(IN, rng)
        state = random_state(rng)
        nxt, _ = model_step(params, state, rng.normal(size=(2, 3, 2)))
        assert_array_equal(nxt.pos, state.pos + params.dt * nxt.vel[..., :2])
        assert_array_equal(nxt.theta, state.theta + params.dt * nxt.vel[..., 2])
        assert_array_equal(nxt.mass, state.mass)
        assert_array_equal(nxt.radius, state.radius)

    def test_permutation_covariance(self):
        rng = np.random.default_rng(5)
        params = init_model(SAIN, rng)
        state = random_state(rng, batch=1, n=3)
        actions = rng.normal(size=(1, 3, 2))
        dvel = rng.normal(scale=1e-3, size=(1, 3, 3))
        dpose = rng.normal(scale=1e-3, size=(1, 3, 4))
        order = [2, 0, 1]
        permuted = ObjectState(
            pos=state.pos[:, order], theta=state.theta[:, order], vel=state.vel[:, order],
            mass=state.mass[:, order], radius=state.radius[:, order],
        )
        out, _ = model_step(params, state, actions, dvel, dpose)
        out_perm, _ = model_step(params, permuted, actions[:, order], dvel[:, order], dpose[:, order])
        assert_allclose(out_perm.pos, out.pos[:, order], rtol=0, atol=1e-9)
        assert_allclose(out_perm.vel, out.vel[:, order], rtol=0, atol=1e-9)

    def test_widened_network_matches_in_when_extras_are_ablated(self):
        rng = np.random.default_rng(11)
        in_params = init_model(IN, rng)
        sain_params = widen_in_to_sain(in_params)
        state = random_state(rng)
        actions = rng.normal(size=(2, 3, 2))
        expected, _ = model_step(in_params, state, actions)
        got, _ = model_step(sain_params, state, actions, np.zeros((2, 3, 3)), np.zeros((2, 3, 4)))
        assert_allclose(got.vel, expected.vel, rtol=1e-12, atol=1e-15)
        assert_allclose(got.pos, expected.pos, rtol=1e-12, atol=1e-15)

    def test_kind_mismatch_rejected(self):
        with self.assertRaises(ContractViolation):
            in_step(self.world, np.zeros((2, 2)), zero_model(SAIN))
        with self.assertRaises(ContractViolation):
            model_step(zero_model(SAIN), ObjectState.from_batch(WorldBatch.from_world(self.world)), np.zeros((1, 2, 2)))


class RolloutTests(SimpleTestCase):

    def test_zero_weights_at_rest_stay_put(self):
        world = make_world([(0.0, 0.0, 0.0, 0, 0, 0, 0.9, R1), (0.3, 0.0, 0.0, 0, 0, 0, 1.1, R2)])
        for kind in (IN, SAIN):
            predicted = rollout_model(zero_model(kind), world, np.zeros((20, 2)))
            self.assertEqual(predicted.n_states, 21)
            for k in range(21):
                assert_array_equal(predicted.pose[k], predicted.pose[0])

    def test_zero_weights_drift_linearly(self):
        world = make_world([(0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.9, R1)])
        predicted = rollout_model(zero_model(IN), world, np.zeros((50, 2)))
        assert_allclose(predicted.pose[:, 0, 0], 0.1 * DT * np.arange(51), rtol=0, atol=1e-12)
        assert_array_equal(predicted.pose[:, 0, 1], np.zeros(51))

    def test_horizon_truncation(self):
        world = two_disk_world()
        predicted = rollout_model(zero_model(IN), world, np.zeros((30, 2)), T=10)
        self.assertEqual(predicted.n_steps, 10)
        with self.assertRaises(ContractViolation):
            rollout_model(zero_model(IN), world, np.zeros((5, 2)), T=10)

    def test_engine_trajectory_independent_of_parameters(self):
        trajectory = pushing_trajectory(steps=30)
        batch = trajectory.batch_at(0)
        path = trajectory.pusher_pos[:, None]
        nominal = NominalEngine()
        dvel, dpose = nominal.deltas(batch, path)
        snapshot = (dvel.copy(), dpose.copy())
        rng = np.random.default_rng(0)
        for _ in range(2):
            params = init_model(SAIN, rng)
            rollout_arrays(params, ObjectState.from_batch(batch), path, RP, dvel, dpose)
        again = nominal.deltas(batch, path)
        assert_array_equal(dvel, snapshot[0])
        assert_array_equal(again[0], snapshot[0])
        assert_array_equal(again[1], snapshot[1])

    def test_physics_model_reproduces_engine(self):
        trajectory = pushing_trajectory(steps=48)
        predicted = PhysicsModel(sim=SimConfig()).predict(trajectory.batch_at(0), trajectory.pusher_pos[:, None])
        assert_allclose(predicted['pose'][:, 0], trajectory.pose, atol=1e-9)

    def test_in_runs_on_more_objects_than_trained(self):
        params = init_model(IN, np.random.default_rng(2))
        world = make_world([
            (0.0, 0.0, 0.0, 0, 0, 0, 0.9, R1),
            (0.12, 0.0, 0.0, 0, 0, 0, 1.1, R2),
            (0.24, 0.01, 0.0, 0, 0, 0, 1.0, R1),
        ], pusher_position=(-(R1 + RP), 0.0))
        predicted = rollout_model(params, world, np.tile([0.05, 0.0], (40, 1)))
        self.assertEqual(predicted.pose.shape, (41, 3, 3))
        self.assertTrue(np.all(np.isfinite(predicted.pose)))


class LossTests(SimpleTestCase):

    def arrays(self, offset=(0.0, 0.0)):
        pos = np.zeros((2, 1, 1, 2))
        pos[1, 0, 0] += offset
        return pos, np.zeros((2, 1, 1)), np.zeros((2, 1, 1, 3))

    def test_identical_trajectories(self):
        self.assertEqual(trajectory_loss(self.arrays(), self.arrays()), 0.0)

    def test_pure_regularizer(self):
        params = init_model(IN, np.random.default_rng(0))
        loss = trajectory_loss(self.arrays(), self.arrays(), params, lam=1e-3)
        self.assertAlmostEqual(loss, 1e-3 * params.squared_norm(), places=12)

    def test_position_error_example(self):
        loss = trajectory_loss(self.arrays((0.003, 0.004)), self.arrays())
        self.assertAlmostEqual(loss, 25e-6, places=15)

    def test_rotation_uses_sin_cos(self):
        pred, truth = self.arrays(), self.arrays()
        pred[1][1] = 2.0 * math.pi
        self.assertAlmostEqual(trajectory_loss(pred, truth), 0.0, places=20)

    def test_mismatched_lengths_rejected(self):
        short = tuple(a[:1] for a in self.arrays())
        with self.assertRaises(ContractViolation):
            trajectory_loss(short, self.arrays())


class GradientTests(SimpleTestCase):

    def rollout_loss(self, kind, n_steps=10, init_rng=None):
        trajectory = pushing_trajectory(steps=n_steps, heading=0.2)
        batch = trajectory.batch_at(0)
        path = trajectory.pusher_pos[:, None]
        state0 = ObjectState.from_batch(batch)
        dvel = dpose = None
        if kind == SAIN:
            dvel, dpose = NominalEngine().deltas(batch, path)
        truth = (trajectory.pose[:, None, :, :2], trajectory.pose[:, None, :, 2], trajectory.twist[:, None])
        params = init_model(kind, init_rng or np.random.default_rng(7), hidden=SMALL_HIDDEN)

        def loss_fn(blocks):
            candidate = params.with_blocks(blocks)
            rollout = rollout_arrays(candidate, state0, path, RP, dvel, dpose, keep_tapes=True)
            loss, g_pos, g_theta, g_vel = data_loss_and_grads(rollout.pos, rollout.theta, rollout.vel, *truth)
            grads = rollout_backward(candidate, rollout, g_pos, g_theta, g_vel)
            return loss, grads, rollout_signature(rollout)

        return params, loss_fn

    def test_sain_rollout_gradient(self):
        for seed, child in enumerate(np.random.SeedSequence(1).spawn(5)):
            init_seq, check_seq = child.spawn(2)
            with self.subTest(seed=seed):
                params, loss_fn = self.rollout_loss(SAIN, init_rng=np.random.default_rng(init_seq))
                report = grad_check(params.blocks(), loss_fn, tolerance=1e-4, n_samples=80,
                                    rng=np.random.default_rng(check_seq), eps=1e-6, floor=1e-6)
                self.assertTrue(report.passed, report)
                self.assertGreater(report.n_checked, 40)

    def test_in_rollout_gradient(self):
        params, loss_fn = self.rollout_loss(IN)
        report = grad_check(params.blocks(), loss_fn, tolerance=1e-4, n_samples=60,
                            rng=np.random.default_rng(2), eps=1e-6, floor=1e-6)
        self.assertTrue(report.passed, report)


class TrainingTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = pushing_dataset()
        cls.cfg = TrainConfig(iterations=40, batch_size=64, rollout_length=12, log_every=10,
                              validation_fraction=0.25, lr0=1e-3, fine_tune_iterations=10)

    def test_windows_cover_full_blocks_only(self):
        windows = build_windows(self.dataset, 10, with_engine=False)
        self.assertEqual(len(windows), 8)
        self.assertEqual(windows.length, 10)
        self.assertEqual(windows.true_pos.shape, (11, 8, 2, 2))
        self.assertIsNone(windows.engine_dvel)

    def test_window_length_shrinks_to_shortest_trajectory(self):
        windows = build_windows(pushing_dataset(n=2, steps=8), 200, with_engine=False)
        self.assertEqual(windows.length, 8)
        self.assertEqual(len(windows), 2)

    def test_stored_shadows_are_used(self):
        trajectory = pushing_trajectory(steps=12)
        shadow = ShadowWindow(start=0, pose=np.zeros((13, 2, 3)), twist=np.zeros((13, 2, 3)))
        dataset = Dataset(metadata={'dt': DT}, records=[TrajectoryRecord(0, trajectory, shadows=[shadow])])
        windows = build_windows(dataset, 12)
        assert_array_equal(windows.engine_dvel, np.zeros((12, 1, 2, 3)))

    def test_missing_shadows_are_replayed(self):
        trajectory = pushing_trajectory(steps=12)
        dataset = Dataset(metadata={'dt': DT}, records=[TrajectoryRecord(0, trajectory)])
        windows = build_windows(dataset, 12)
        dvel, _ = NominalEngine().deltas(trajectory.batch_at(0), trajectory.pusher_pos[:, None])
        assert_array_equal(windows.engine_dvel, dvel)

    def test_mixed_object_counts_rejected(self):
        single = make_world([(0.0, 0.0, 0.0, 0, 0, 0, 0.9, R1)], pusher_position=(-(R1 + RP), 0.0))
        other = rollout_physics(single, np.tile([0.05, 0.0], (12, 1)), SimConfig())
        dataset = Dataset(metadata={'dt': DT}, records=[
            TrajectoryRecord(0, pushing_trajectory(steps=12)), TrajectoryRecord(1, other),
        ])
        with self.assertRaises(ContractViolation):
            build_windows(dataset, 12)

    def test_codec_leaves_effects_unscaled(self):
        windows = build_windows(self.dataset, 12)
        codec = fit_codec(SAIN, windows, DT)
        assert_array_equal(codec.dyn_in.mean[DYN_EFFECT], np.zeros(16))
        assert_array_equal(codec.dyn_in.std[DYN_EFFECT], np.ones(16))
        assert_array_equal(codec.dyn_out.mean, np.zeros(3))

    def test_training_reduces_loss_and_is_deterministic(self):
        first = train(IN, self.dataset, self.cfg, hidden=SMALL_HIDDEN)
        second = train(IN, self.dataset, self.cfg, hidden=SMALL_HIDDEN)
        curve = first.metadata['loss_curve']
        self.assertEqual(curve[0][0], 0)
        self.assertEqual(curve[-1][0], self.cfg.iterations - 1)
        self.assertLess(curve[-1][1], curve[0][1])
        for name, value in first.blocks().items():
            assert_array_equal(value, second.blocks()[name])

    def test_sain_trains_with_engine_deltas(self):
        params = train(SAIN, self.dataset, self.cfg, hidden=SMALL_HIDDEN)
        self.assertEqual(params.kind, SAIN)
        windows = build_windows(self.dataset, 12)
        self.assertTrue(math.isfinite(windows_loss(params, windows)))

    def test_non_finite_loss_aborts_with_last_good_parameters(self):
        with mock.patch('dynamics_models.utils.training.objective', return_value=(math.nan, math.nan, {})):
            with self.assertRaises(TrainingDiverged) as caught:
                train(IN, self.dataset, self.cfg, hidden=SMALL_HIDDEN)
        self.assertEqual(caught.exception.iteration, 0)
        self.assertEqual(caught.exception.checkpoint.kind, IN)

    def test_fine_tune_on_empty_dataset_is_identity(self):
        params = init_model(SAIN, np.random.default_rng(0))
        empty = Dataset(metadata={'dt': DT}, records=[])
        self.assertIs(fine_tune(params, empty, self.cfg), params)

    def test_fine_tune_keeps_codec(self):
        params = train(IN, self.dataset, self.cfg, hidden=SMALL_HIDDEN)
        tuned = fine_tune(params, pushing_dataset(n=2), self.cfg)
        self.assertIs(tuned.codec, params.codec)
        self.assertTrue(tuned.metadata['fine_tuned'])
        self.assertIn('loss_curve', tuned.metadata)

    def test_trained_two_disk_model_predicts_three_disks(self):
        params = train(IN, self.dataset, self.cfg, hidden=SMALL_HIDDEN)
        world = make_world([
            (0.0, 0.0, 0.0, 0, 0, 0, 0.9, R1),
            (R1 + R2 + 1e-3, 0.0, 0.0, 0, 0, 0, 1.1, R2),
            (R1 + 2 * R2 + 0.112, 0.0, 0.0, 0, 0, 0, 1.0, R2),
        ], pusher_position=(-(R1 + RP), 0.0))
        start = np.array([-(R1 + RP), 0.0])
        path = start + np.arange(25)[:, None, None] * np.array([DT * 0.05, 0.0])
        predicted = LearnedModel(params).predict(WorldBatch.from_world(world), path)
        self.assertEqual(predicted['pose'].shape, (25, 1, 3, 3))
        self.assertTrue(np.all(np.isfinite(predicted['pose'])))


class TrainedModelComparisonTests(SimpleTestCase):
    """Orderings between trained models, physics-only and each other on a few hundred windows."""

    HORIZON = 24
    HIDDEN = (32, 32)

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.nominal = NominalEngine()
        cls.cfg = TrainConfig(iterations=500, batch_size=32, rollout_length=cls.HORIZON, lr0=2e-3,
                              decay_every=250, log_every=100, validation_fraction=0.1,
                              fine_tune_iterations=150, seed=0)

        # low-friction surface: the nominal engine stops the disks far too early
        cls.slippery = sliding_dataset(200, mu=0.05, seed=1)
        cls.slippery_held_out = sliding_dataset(40, mu=0.05, seed=2)
        cls.sliding_sain = train(SAIN, cls.slippery, cls.cfg, cls.nominal, hidden=cls.HIDDEN)

        angles = np.linspace(0.45, 0.95, 100)
        cls.pushes = off_center_dataset(angles)
        cls.pushes_held_out = off_center_dataset(angles[:-1][::5] + 0.0025)
        cls.pushing_in = train(IN, cls.pushes, cls.cfg, cls.nominal, hidden=cls.HIDDEN)
        cls.pushing_sain = train(SAIN, cls.pushes, cls.cfg, cls.nominal, hidden=cls.HIDDEN)

    def test_sain_beats_physics_on_mismatched_friction(self):
        physics = mean_position_error(PhysicsModel(nominal=self.nominal), self.slippery_held_out, self.HORIZON)
        learned = mean_position_error(LearnedModel(self.sliding_sain, self.nominal), self.slippery_held_out, self.HORIZON)
        self.assertGreater(physics, 3e-3)
        self.assertLess(learned, 0.9 * physics)

    def test_trained_sain_beats_its_zero_weight_version(self):
        untrained = zero_model(SAIN, codec=self.sliding_sain.codec, hidden=self.HIDDEN, dt=DT)
        coasting = mean_position_error(LearnedModel(untrained, self.nominal), self.slippery_held_out, self.HORIZON)
        learned = mean_position_error(LearnedModel(self.sliding_sain, self.nominal), self.slippery_held_out, self.HORIZON)
        self.assertLess(learned, coasting)

    def test_sain_beats_in_when_engine_sees_the_contact(self):
        pushed = slice(0, 1)
        in_error = mean_position_error(LearnedModel(self.pushing_in, self.nominal), self.pushes_held_out,
                                       self.HORIZON, pushed)
        sain_error = mean_position_error(LearnedModel(self.pushing_sain, self.nominal), self.pushes_held_out,
                                         self.HORIZON, pushed)
        # mirrored pushes start out identical to IN; only the engine deltas carry the side of contact
        lateral = float(np.mean([abs(r.trajectory.pose[self.HORIZON, 0, 1]) for r in self.pushes_held_out.records]))
        self.assertGreater(lateral, 5e-4)
        self.assertLess(sain_error, in_error)

    def test_trained_in_step_tracks_engine_for_one_step(self):
        worst = 0.0
        for record in self.pushes_held_out.records:
            trajectory = record.trajectory
            for k in range(0, self.HORIZON, 4):
                actions = encode_actions(
                    trajectory.pose[k][None, :, :2], trajectory.radius[None],
                    trajectory.pusher_pos[k][None], trajectory.pusher_pos[k + 1][None], RP, DT,
                )[0]
                nxt = in_step(trajectory.world_at(k), actions, self.pushing_in)
                predicted = np.array([[disk.pose.x, disk.pose.y] for disk in nxt.disks])
                worst = max(worst, float(np.linalg.norm(predicted - trajectory.pose[k + 1, :, :2], axis=-1).max()))
        self.assertLess(worst, 5e-4)

    def test_fine_tune_lowers_target_error(self):
        target = sliding_dataset(100, mu=0.08, seed=3)
        target_held_out = sliding_dataset(40, mu=0.08, seed=4)
        tuned = fine_tune(self.sliding_sain, target, self.cfg, self.nominal)

        before = mean_position_error(LearnedModel(self.sliding_sain, self.nominal), target_held_out, self.HORIZON)
        after = mean_position_error(LearnedModel(tuned, self.nominal), target_held_out, self.HORIZON)
        self.assertLess(after, before)
        windows = build_windows(target_held_out, self.HORIZON, self.nominal)
        self.assertLess(windows_loss(tuned, windows), windows_loss(self.sliding_sain, windows))


class CheckpointTests(SimpleTestCase):

    def test_round_trip(self):
        params = init_model(SAIN, np.random.default_rng(4), hidden=SMALL_HIDDEN)
        params = params.with_blocks(params.blocks(), metadata={'loss_curve': [[0, 1.5, None]], 'seed': 4})
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'sain.ckpt'
            save_model(path, params)
            loaded = load_model(path)
        self.assertEqual(loaded.kind, SAIN)
        self.assertEqual(loaded.dt, params.dt)
        self.assertEqual(loaded.metadata, params.metadata)
        self.assertEqual(loaded.codec.to_dict(), params.codec.to_dict())
        for name, value in params.blocks().items():
            assert_array_equal(loaded.blocks()[name], value)

    def test_plain_checkpoint_is_not_a_model(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'plain.ckpt'
            save_checkpoint(path, {'W0': np.ones((2, 2))}, {'seed': 0})
            with self.assertRaises(CheckpointFormatError):
                load_model(path)
