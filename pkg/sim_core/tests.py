import math

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from sim_core.exceptions import ContractViolation
from sim_core.utils.batch import WorldBatch
from sim_core.utils.contacts import resolve_contacts
from sim_core.utils.engine import rollout_physics, step, step_batch
from sim_core.utils.friction import coulomb_friction
from sim_core.utils.state import (
    DiskState,
    Pose2,
    PusherState,
    SimConfig,
    SurfaceModel,
    Twist2,
    WorldState,
    wrap_angle,
)

FAR = (-1.0, -1.0)


def make_world(disks, pusher_position=FAR, pusher_velocity=(0.0, 0.0), pusher_mass=None, mu=0.15):
    """disks: iterable of (x, y, theta, vx, vy, omega, mass, radius)."""
    return WorldState(
        disks=tuple(
            DiskState(pose=Pose2(x, y, th), twist=Twist2(vx, vy, w), mass=m, radius=r)
            for x, y, th, vx, vy, w, m, r in disks
        ),
        pusher=PusherState(position=pusher_position, velocity=pusher_velocity, mass=pusher_mass),
        surface=SurfaceModel(mu_nominal=mu),
    )


def pushing_world():
    r1, r2, rp = 0.05, 0.055, 0.0048
    return make_world(
        [(0.0, 0.0, 0.0, 0, 0, 0, 1.0, r1),
         (r1 + r2 + 1e-3, 0.01, 0.0, 0, 0, 0, 0.9, r2)],
        pusher_position=(-(r1 + rp), 0.0),
    )


class StateTests(SimpleTestCase):

    def test_wrap_angle_range(self):
        self.assertAlmostEqual(wrap_angle(3 * math.pi / 2), -math.pi / 2)
        self.assertEqual(wrap_angle(-math.pi), math.pi)
        self.assertEqual(wrap_angle(0.1), 0.1)

    def test_invalid_disk_rejected(self):
        with self.assertRaises(ValueError):
            DiskState(pose=Pose2(0, 0), twist=Twist2(), mass=0.0, radius=0.05)
        with self.assertRaises(ValueError):
            Pose2(float('nan'), 0.0)

    def test_sim_config_validation(self):
        with self.assertRaises(ValueError):
            SimConfig(dt=0.0)
        with self.assertRaises(ValueError):
            SimConfig(solver_iterations=0)
        with self.assertRaises(ValueError):
            SimConfig.from_dict({'dt': 0.01, 'gravity': 9.81})

    def test_spatial_field_bilinear_and_clamped(self):
        grid = np.array([[0.1, 0.2], [0.3, 0.4]])
        surface = SurfaceModel(mode='spatial_field', mu_field=grid, field_origin=(0.0, 0.0), field_spacing=1.0)
        self.assertAlmostEqual(float(surface.mu_at(np.array([0.5, 0.5]))), 0.25)
        self.assertAlmostEqual(float(surface.mu_at(np.array([-5.0, 0.0]))), 0.1)
        self.assertAlmostEqual(float(surface.mu_at(np.array([5.0, 5.0]))), 0.4)

    def test_uniform_surface_ignores_field(self):
        surface = SurfaceModel(mu_nominal=0.2, mu_field=np.full((3, 3), 0.9))
        assert_array_equal(surface.mu_at(np.zeros((4, 2))), np.full(4, 0.2))


class FrictionTests(SimpleTestCase):

    def test_sliding_force(self):
        disk = DiskState(pose=Pose2(0, 0), twist=Twist2(0.1, 0.0, 0.0), mass=1.0, radius=0.05)
        force, torque = coulomb_friction(disk, SurfaceModel(mu_nominal=0.2))
        assert_allclose(force, [-1.962, 0.0])
        self.assertEqual(torque, 0.0)

    def test_deadband(self):
        disk = DiskState(pose=Pose2(0, 0), twist=Twist2(), mass=1.0, radius=0.05)
        force, torque = coulomb_friction(disk, SurfaceModel(mu_nominal=0.2))
        assert_array_equal(force, [0.0, 0.0])
        self.assertEqual(torque, 0.0)

    def test_spin_torque(self):
        disk = DiskState(pose=Pose2(0, 0), twist=Twist2(0, 0, 1.0), mass=1.0, radius=0.05)
        _, torque = coulomb_friction(disk, SurfaceModel(mu_nominal=0.2))
        self.assertAlmostEqual(torque, -(2.0 / 3.0) * 0.2 * 1.0 * 9.81 * 0.05)
        self.assertAlmostEqual(torque, -0.0654, places=4)


class ContactTests(SimpleTestCase):

    def test_head_on_inelastic(self):
        world = make_world([
            (0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 1.0, 0.05),
            (0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.05),
        ])
        resolved, _ = resolve_contacts(world, SimConfig())
        assert_allclose(resolved.disks[0].twist.as_array(), [0.05, 0.0, 0.0], atol=1e-12)
        assert_allclose(resolved.disks[1].twist.as_array(), [0.05, 0.0, 0.0], atol=1e-12)

    def test_momentum_conserved_in_oblique_contact(self):
        world = make_world([
            (0.0, 0.0, 0.0, 0.1, 0.03, 0.5, 1.0, 0.05),
            (0.08, 0.06, 0.0, -0.02, 0.0, 0.0, 0.8, 0.05),
        ])
        resolved, _ = resolve_contacts(world, SimConfig())
        before = sum(d.mass * d.twist.as_array()[:2] for d in world.disks)
        after = sum(d.mass * d.twist.as_array()[:2] for d in resolved.disks)
        assert_allclose(after, before, atol=1e-12)
        normal = resolved.disk_positions()[1] - resolved.disk_positions()[0]
        normal /= np.linalg.norm(normal)
        relative = resolved.disks[1].twist.as_array()[:2] - resolved.disks[0].twist.as_array()[:2]
        self.assertGreaterEqual(float(relative @ normal), -1e-12)

    def test_no_contact_is_identity(self):
        world = make_world([
            (0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 1.0, 0.05),
            (0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.05),
        ])
        resolved, diagnostics = resolve_contacts(world, SimConfig())
        for a, b in zip(world.disks, resolved.disks):
            assert_array_equal(a.twist.as_array(), b.twist.as_array())
            assert_array_equal(a.pose.as_array(), b.pose.as_array())
        self.assertEqual(diagnostics.projections, 0)

    def test_kinematic_pusher_keeps_velocity(self):
        world = make_world(
            [(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.05)],
            pusher_position=(-0.0548, 0.0), pusher_velocity=(0.05, 0.0),
        )
        resolved, _ = resolve_contacts(world, SimConfig())
        self.assertGreaterEqual(resolved.disks[0].twist.vx, 0.05 - 1e-12)
        self.assertEqual(resolved.pusher.velocity, (0.05, 0.0))

    def test_deep_overlap_is_projected_and_counted(self):
        world = make_world([
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.05),
            (0.09, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.05),
        ])
        resolved, diagnostics = resolve_contacts(world, SimConfig())
        self.assertEqual(diagnostics.deep_penetrations, 1)
        self.assertGreaterEqual(-resolved.min_gap(), -1e-12)
        self.assertLessEqual(-resolved.min_gap(), 1e-4)


class EngineTests(SimpleTestCase):

    def setUp(self):
        self.cfg = SimConfig()

    def test_rest_is_fixed_point(self):
        world = pushing_world()
        nxt = step(world, (0.0, 0.0), self.cfg)
        for a, b in zip(world.disks, nxt.disks):
            assert_array_equal(a.pose.as_array(), b.pose.as_array())
            assert_array_equal(b.twist.as_array(), [0.0, 0.0, 0.0])

    def test_stopping_time(self):
        world = make_world([(0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 1.0, 0.05)])
        steps = 0
        while world.disks[0].twist.speed > 0.0:
            world = step(world, (0.0, 0.0), self.cfg)
            steps += 1
            self.assertLess(steps, 100)
        expected = 0.1 / (0.15 * 9.81)
        self.assertLessEqual(abs(steps * self.cfg.dt - expected), self.cfg.dt)

    def test_push_moves_disk_along_normal(self):
        world = step(pushing_world(), (0.05, 0.0), self.cfg)
        self.assertGreater(world.disks[0].twist.vx, 0.0)

    def test_rollout_consistent_with_step(self):
        plan = [(0.05, 0.002 * k) for k in range(30)]
        trajectory = rollout_physics(pushing_world(), plan, self.cfg)
        self.assertEqual(trajectory.n_states, 31)
        for k in (0, 7, 29):
            expected = step(trajectory.world_at(k), plan[k], self.cfg)
            assert_array_equal(trajectory.pose[k + 1], np.array([d.pose.as_array() for d in expected.disks]))
            assert_array_equal(trajectory.twist[k + 1], np.array([d.twist.as_array() for d in expected.disks]))

    def test_zero_plan_from_rest(self):
        trajectory = rollout_physics(pushing_world(), np.zeros((200, 2)), self.cfg)
        self.assertEqual(trajectory.n_states, 201)
        for k in range(201):
            assert_array_equal(trajectory.pose[k], trajectory.pose[0])

    def test_slow_push_covers_one_centimeter(self):
        trajectory = rollout_physics(pushing_world(), np.tile([0.005, 0.0], (480, 1)), self.cfg)
        self.assertAlmostEqual(trajectory.pusher_displacement(), 0.010, places=9)
        self.assertGreater(trajectory.pose[-1, 0, 0], 0.005)

    def test_empty_plan_rejected(self):
        with self.assertRaises(ContractViolation):
            rollout_physics(pushing_world(), [], self.cfg)

    def test_determinism(self):
        plan = np.tile([0.03, 0.01], (120, 1))
        a = rollout_physics(pushing_world(), plan, self.cfg)
        b = rollout_physics(pushing_world(), plan, self.cfg)
        self.assertTrue(a.equals(b))

    def test_dissipation_with_stationary_pusher(self):
        world = make_world([
            (0.0, 0.0, 0.0, 0.12, 0.02, 1.0, 1.0, 0.05),
            (0.15, 0.01, 0.0, -0.05, 0.0, 0.0, 0.9, 0.055),
        ])
        batch = WorldBatch.from_world(world)
        energy = batch.kinetic_energy()[0]
        for _ in range(120):
            batch, _ = step_batch(batch, (0.0, 0.0), self.cfg)
            current = batch.kinetic_energy()[0]
            self.assertLessEqual(current, energy + 1e-15)
            energy = current

    def test_friction_bound(self):
        world = make_world([(0.0, 0.0, 0.0, 0.1, -0.05, 0.0, 1.2, 0.05)], mu=0.2)
        batch = WorldBatch.from_world(world)
        for _ in range(30):
            nxt, _ = step_batch(batch, (0.0, 0.0), self.cfg)
            impulse = 1.2 * np.linalg.norm(nxt.twist[0, 0, :2] - batch.twist[0, 0, :2])
            self.assertLessEqual(impulse, 0.2 * 1.2 * 9.81 * self.cfg.dt + 1e-12)
            batch = nxt

    def test_non_penetration(self):
        trajectory = rollout_physics(pushing_world(), np.tile([0.08, 0.01], (240, 1)), self.cfg)
        for k in range(trajectory.n_states):
            gap = trajectory.world_at(k).min_gap()
            self.assertGreaterEqual(gap, -self.cfg.penetration_tolerance - 1e-12)

    def test_mirror_symmetry(self):
        angle = 0.3
        base = [
            (0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 1.0, 0.05),
            (0.09, 0.055, -0.1, 0.0, 0.0, 0.0, 0.95, 0.055),
        ]
        pusher = (-0.0548 * math.cos(angle), -0.0548 * math.sin(angle))
        plan = np.array([[0.05 * math.cos(0.2), 0.05 * math.sin(0.2)]] * 150)

        mirrored = [(x, -y, -th, vx, -vy, -w, m, r) for x, y, th, vx, vy, w, m, r in base]
        a = rollout_physics(make_world(base, pusher_position=pusher), plan, self.cfg)
        b = rollout_physics(make_world(mirrored, pusher_position=(pusher[0], -pusher[1])), plan * [1, -1], self.cfg)

        flip = np.array([1.0, -1.0, -1.0])
        assert_allclose(b.pose * flip, a.pose, atol=1e-9)
        assert_allclose(b.twist * flip, a.twist, atol=1e-9)

    def test_batched_matches_single(self):
        worlds = [pushing_world(), pushing_world().with_pusher(position=(-0.05, -0.02))]
        batch = WorldBatch.from_world(worlds[0], batch_size=2)
        batch.pusher_pos[1] = worlds[1].pusher.position
        commands = np.array([[0.05, 0.0], [0.04, 0.02]])
        for _ in range(40):
            batch, _ = step_batch(batch, commands, self.cfg)
            worlds = [step(w, c, self.cfg) for w, c in zip(worlds, commands)]
        for index, world in enumerate(worlds):
            assert_array_equal(batch.pose[index], np.array([d.pose.as_array() for d in world.disks]))

    def test_dynamic_pusher_accelerates_under_force(self):
        world = make_world([(0.0, 0.0, 0.0, 0, 0, 0, 1.0, 0.05)], pusher_position=(-0.5, 0.0), pusher_mass=0.1)
        nxt = step(world, (0.2, 0.0), self.cfg)
        self.assertAlmostEqual(nxt.pusher.velocity[0], self.cfg.dt * 0.2 / 0.1)
