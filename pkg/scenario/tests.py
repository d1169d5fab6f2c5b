import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from dynamics_models.utils.nominal import NominalEngine
from dynamics_models.utils.rollout import PhysicsModel
from scenario.exceptions import DatasetFormatError, SceneSamplingError
from scenario.utils.dataset_io import dumps_dataset, load_dataset, save_dataset
from scenario.utils.generation import generate_dataset, shadow_windows, surface_shift
from scenario.utils.noise import apply_observation_noise
from scenario.utils.records import Dataset, TrajectoryRecord
from scenario.utils.sampling import build_scene, sample_scene, sample_scene_params
from scenario.utils.specs import (
    DIRECT_FORCE,
    POSITION_CONTROL,
    PushSpec,
    SceneSpec,
    SurrogateRealSpec,
)
from scenario.utils.surfaces import random_mu_field
from sim_core.constants import PUSHER_RADIUS, SURFACE_SPATIAL_FIELD
from sim_core.utils.engine import rollout_physics
from sim_core.utils.state import SimConfig, wrap_angle
from sim_core.utils.trajectory import Trajectory

DT = 1.0 / 240.0


def quick_dataset(n=10, steps=24, surface=None, seed=0):
    """Short position-controlled pushes with shadows, without the full generator."""
    rng = np.random.default_rng(seed)
    push = PushSpec()
    nominal = NominalEngine()
    records = []
    for index in range(n):
        params = sample_scene_params(SceneSpec(), push, rng, index)
        world = build_scene(params, push, surface)
        heading = params['pusher_angle'] + params['push_direction']
        plan = np.tile([0.05 * math.cos(heading), 0.05 * math.sin(heading)], (steps, 1))
        trajectory = rollout_physics(world, plan, SimConfig())
        records.append(TrajectoryRecord(index, trajectory, shadow_windows(trajectory, nominal, 12), params))
    return Dataset(metadata={'dt': DT, 'setup': POSITION_CONTROL, 'seed': seed}, records=records)


class SamplingTests(SimpleTestCase):

    def test_two_disk_scene_is_tangent_chain(self):
        world = sample_scene(SceneSpec(), np.random.default_rng(0))
        d1, d2 = world.disks
        self.assertEqual((d1.pose.x, d1.pose.y), (0.0, 0.0))
        gap = math.hypot(d2.pose.x - d1.pose.x, d2.pose.y - d1.pose.y)
        self.assertAlmostEqual(gap, d1.radius + d2.radius, delta=1e-9)
        pusher_gap = math.hypot(world.pusher.position[0], world.pusher.position[1])
        self.assertAlmostEqual(pusher_gap, d1.radius + PUSHER_RADIUS, delta=1e-9)
        self.assertTrue(world.pusher.is_kinematic)

    def test_three_disk_scene_does_not_overlap(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            world = sample_scene(SceneSpec(n_disks=3), rng)
            self.assertEqual(world.n_disks, 3)
            self.assertGreater(world.min_gap(), -1e-9)
            d2, d3 = world.disks[1:]
            self.assertAlmostEqual(math.hypot(d3.pose.x - d2.pose.x, d3.pose.y - d2.pose.y),
                                   d2.radius + d3.radius, delta=1e-9)

    def test_sampled_parameters_stay_in_range(self):
        rng = np.random.default_rng(2)
        spec, push = SceneSpec(), PushSpec()
        draws = [sample_scene_params(spec, push, rng) for _ in range(10_000)]
        mu = np.array([d['mu'] for d in draws])
        masses = np.array([d['masses'] for d in draws])
        radii = np.array([d['radii'] for d in draws])
        directions = np.array([d['push_direction'] for d in draws])
        self.assertTrue(np.all((mu >= 0.05) & (mu <= 0.25)))
        self.assertTrue(np.all((masses >= 0.85) & (masses <= 1.15)))
        self.assertTrue(np.all((radii >= 0.05) & (radii <= 0.06)))
        self.assertTrue(np.all(np.abs(directions) <= math.pi / 6))

    def test_hopeless_placement_reports_index(self):
        spec = SceneSpec(n_disks=3, placement_range=(math.pi, math.pi), max_tries=5)
        with self.assertRaises(SceneSamplingError) as caught:
            sample_scene_params(spec, PushSpec(), np.random.default_rng(0), index=7)
        self.assertEqual(caught.exception.index, 7)

    def test_invalid_specs_rejected(self):
        with self.assertRaises(ValueError):
            SceneSpec(n_disks=4)
        with self.assertRaises(ValueError):
            SceneSpec(mu_range=(0.3, 0.1))
        with self.assertRaises(ValueError):
            PushSpec(setup='Teleport')
        with self.assertRaises(ValueError):
            SceneSpec.from_dict({'n_disks': 2, 'colour': 'red'})


class SurfaceTests(SimpleTestCase):

    def test_field_within_bounds(self):
        surface = random_mu_field(SurrogateRealSpec(), np.random.default_rng(0))
        self.assertEqual(surface.mode, SURFACE_SPATIAL_FIELD)
        self.assertTrue(np.all(surface.mu_field > 0.05))
        self.assertTrue(np.all(surface.mu_field < 0.25))
        self.assertAlmostEqual(float(surface.mu_field.mean()), 0.15, delta=0.02)

    def test_field_varies_smoothly(self):
        grid = random_mu_field(SurrogateRealSpec(), np.random.default_rng(1)).mu_field
        self.assertGreater(grid.max() - grid.min(), 0.02)
        self.assertLess(np.max(np.abs(np.diff(grid, axis=0))), 0.02)

    def test_surface_shift_raises_mean_friction(self):
        shifted = surface_shift(SurrogateRealSpec(), seed=3)
        self.assertEqual(shifted.mu_mean, 0.2)
        self.assertEqual(shifted.field_seed, 4)
        grid = random_mu_field(shifted, np.random.default_rng(0)).mu_field
        self.assertGreater(float(grid.mean()), 0.17)
        self.assertTrue(np.all(grid < 0.25))


class NoiseTests(SimpleTestCase):

    def still_trajectory(self, states):
        return Trajectory(
            dt=DT,
            pose=np.zeros((states, 1, 3)),
            twist=np.zeros((states, 1, 3)),
            mass=np.ones(1),
            radius=np.full(1, 0.05),
            pusher_pos=np.zeros((states, 2)),
            pusher_vel=np.zeros((states, 2)),
            commands=np.zeros((states - 1, 2)),
            pusher_radius=PUSHER_RADIUS,
        )

    def test_zero_noise_is_identity(self):
        trajectory = self.still_trajectory(5)
        self.assertIs(apply_observation_noise(trajectory, 0.0, 0.0, np.random.default_rng(0)), trajectory)

    def test_noise_level_matches_sigma(self):
        noisy = apply_observation_noise(self.still_trajectory(50_001), 0.0005, 0.005, np.random.default_rng(0))
        self.assertAlmostEqual(float(np.std(noisy.pose[..., :2])) / 0.0005, 1.0, delta=0.02)
        self.assertAlmostEqual(float(np.std(noisy.pose[..., 2])) / 0.005, 1.0, delta=0.02)

    def test_velocities_are_finite_differences(self):
        noisy = apply_observation_noise(self.still_trajectory(10), 0.001, 0.01, np.random.default_rng(1))
        assert_allclose(noisy.twist[1:, :, :2], np.diff(noisy.pose[..., :2], axis=0) / DT)
        assert_allclose(noisy.twist[0, :, :2], (noisy.pose[1, :, :2] - noisy.pose[0, :, :2]) / DT)
        assert_array_equal(noisy.pusher_pos, np.zeros((10, 2)))

    def test_no_velocity_row_keeps_the_clean_value(self):
        clean = quick_dataset(n=1, steps=24).records[0].trajectory
        noisy = apply_observation_noise(clean, 0.0005, 0.005, np.random.default_rng(3))
        step = np.diff(noisy.pose, axis=0)
        step[..., 2] = wrap_angle(step[..., 2])
        differences = np.concatenate([step[:1], step]) / DT
        assert_allclose(noisy.twist, differences, atol=1e-9)
        self.assertGreater(float(np.abs(noisy.twist[0] - clean.twist[0]).max()), 1e-3)

    def test_single_state_noise_keeps_velocity(self):
        trajectory = self.still_trajectory(1)
        noisy = apply_observation_noise(trajectory, 0.001, 0.01, np.random.default_rng(4))
        assert_array_equal(noisy.twist, trajectory.twist)

    def test_noise_raises_physics_prediction_error(self):
        clean = quick_dataset(n=1, steps=48).records[0].trajectory
        noisy = apply_observation_noise(clean, 0.0005, 0.005, np.random.default_rng(2))
        model = PhysicsModel(sim=SimConfig())

        def final_error(trajectory):
            predicted = model.predict(trajectory.batch_at(0), trajectory.pusher_pos[:, None])
            return float(np.linalg.norm(predicted['pose'][-1, 0, :, :2] - trajectory.pose[-1, :, :2]))

        self.assertLess(final_error(clean), 1e-9)
        self.assertGreater(final_error(noisy), 1e-4)


class GenerationTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = generate_dataset(3, POSITION_CONTROL, SceneSpec(), seed=5)

    def test_trajectory_shape_and_header(self):
        self.assertEqual(len(self.dataset), 3)
        self.assertEqual(self.dataset.dt, DT)
        for record in self.dataset.records:
            self.assertEqual(record.trajectory.n_states, 481)
            self.assertEqual([s.start for s in record.shadows], [0, 200])
            self.assertEqual(record.shadows[0].length, 200)

    def test_position_control_travel(self):
        for record in self.dataset.records:
            self.assertAlmostEqual(record.trajectory.pusher_displacement(), 0.010, delta=1e-9)
            self.assertIsNone(record.trajectory.pusher_mass)

    def test_shadow_starts_from_true_state(self):
        record = self.dataset.records[0]
        assert_array_equal(record.shadows[1].pose[0], record.trajectory.pose[200])

    def test_same_seed_same_bytes(self):
        again = generate_dataset(3, POSITION_CONTROL, SceneSpec(), seed=5, threads=2)
        self.assertEqual(dumps_dataset(again), dumps_dataset(self.dataset))

    def test_different_seed_differs(self):
        other = generate_dataset(1, POSITION_CONTROL, SceneSpec(), seed=6, shadow_window=0)
        self.assertNotEqual(other.records[0].params['mu'], self.dataset.records[0].params['mu'])

    def test_direct_force_travel_near_one_centimeter(self):
        dataset = generate_dataset(2, DIRECT_FORCE, SceneSpec(), seed=1, shadow_window=0)
        for record in dataset.records:
            self.assertEqual(record.trajectory.pusher_mass, 0.1)
            self.assertGreater(record.params['force'], 0.0)
            self.assertAlmostEqual(record.trajectory.pusher_displacement(), 0.010, delta=0.002)

    def test_three_disk_pipeline(self):
        dataset = generate_dataset(1, POSITION_CONTROL, SceneSpec(n_disks=3), seed=2, shadow_window=0)
        self.assertEqual(dataset.records[0].trajectory.n_disks, 3)
        self.assertEqual(dataset.metadata['n_disks'], 3)

    def test_surrogate_world_uses_nominal_disks_and_field(self):
        dataset = generate_dataset(1, POSITION_CONTROL, SceneSpec(), seed=3,
                                   surrogate=SurrogateRealSpec(), shadow_window=0)
        trajectory = dataset.records[0].trajectory
        assert_array_equal(trajectory.mass, [0.896, 1.1])
        assert_array_equal(trajectory.radius, [0.0525, 0.058])
        self.assertEqual(trajectory.surface.mode, SURFACE_SPATIAL_FIELD)
        self.assertEqual(dataset.metadata['world'], 'surrogate')

    def test_sampling_failure_propagates_index(self):
        spec = SceneSpec(n_disks=3, placement_range=(math.pi, math.pi), max_tries=2)
        with self.assertRaises(SceneSamplingError) as caught:
            generate_dataset(2, POSITION_CONTROL, spec, seed=0)
        self.assertEqual(caught.exception.index, 0)

    def test_empty_request_rejected(self):
        with self.assertRaises(ValueError):
            generate_dataset(0, POSITION_CONTROL)


class DatasetIOTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = quick_dataset()

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'pushes.jsonl'

    def tearDown(self):
        self.tmp.cleanup()

    def rewrite_line(self, number, transform):
        lines = self.path.read_text().splitlines()
        lines[number - 1] = transform(lines[number - 1])
        self.path.write_text('\n'.join(lines) + '\n')

    def test_round_trip(self):
        save_dataset(self.dataset, self.path)
        loaded = load_dataset(self.path)
        self.assertTrue(loaded.equals(self.dataset))
        self.assertEqual(loaded.metadata['dt'], DT)
        self.assertEqual(loaded.metadata['units']['length'], 'm')

    def test_shared_field_round_trip(self):
        surface = random_mu_field(SurrogateRealSpec(), np.random.default_rng(0))
        dataset = quick_dataset(n=2, surface=surface)
        save_dataset(dataset, self.path)
        loaded = load_dataset(self.path)
        self.assertTrue(loaded.equals(dataset))
        self.assertIs(loaded.records[0].trajectory.surface, loaded.records[1].trajectory.surface)

    def test_corrupted_line_is_named(self):
        save_dataset(self.dataset, self.path)
        self.rewrite_line(7, lambda line: line[: len(line) // 2])
        with self.assertRaises(DatasetFormatError) as caught:
            load_dataset(self.path)
        self.assertEqual(caught.exception.line, 7)
        self.assertIn('line 7', str(caught.exception))

    def test_non_finite_value_rejected(self):
        save_dataset(self.dataset, self.path)
        self.rewrite_line(3, lambda line: line.replace('"dt": ', '"dt": NaN, "x": ', 1))
        with self.assertRaises(DatasetFormatError) as caught:
            load_dataset(self.path)
        self.assertEqual(caught.exception.line, 3)

    def test_version_mismatch_rejected(self):
        save_dataset(self.dataset, self.path)
        self.rewrite_line(1, lambda line: line.replace('"version": 1', '"version": 99'))
        with self.assertRaises(DatasetFormatError) as caught:
            load_dataset(self.path)
        self.assertEqual(caught.exception.line, 1)

    def test_missing_trajectories_rejected(self):
        save_dataset(self.dataset, self.path)
        lines = self.path.read_text().splitlines()
        self.path.write_text('\n'.join(lines[:-2]) + '\n')
        with self.assertRaises(DatasetFormatError):
            load_dataset(self.path)

    def test_save_is_deterministic(self):
        first = save_dataset(self.dataset, self.path)
        second = save_dataset(self.dataset, Path(self.tmp.name) / 'again.jsonl')
        self.assertEqual(first, second)
