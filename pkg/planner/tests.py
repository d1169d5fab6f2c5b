import math
from dataclasses import replace
from unittest import mock

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from dynamics_models.utils.rollout import PhysicsModel
from planner.exceptions import PlanningError
from planner.utils.actions import (
    N_CONTACT_ANGLES,
    PUSH_LENGTH,
    bin_midpoints,
    enumerate_actions,
    place_pusher,
    push_geometry,
)
from planner.utils.episode import concatenate_segments, execute_action, run_episode
from planner.utils.goals import EASY, HARD, Goal, control_world, goal_angle, sample_goal, swap_disks
from planner.utils.heuristic import heuristic
from planner.utils.search import PlannerConfig, active_horizon, plan_next, simulate_actions
from sim_core.utils.batch import WorldBatch
from sim_core.utils.state import DiskState, Pose2, SimConfig, Twist2, WorldState

DT = 1.0 / 240.0
SIM = SimConfig(dt=DT)
# horizon 1 everywhere keeps each decision to one batched expansion
GREEDY = PlannerConfig(horizon_near=1, horizon_far=1, max_episode_actions=6)


def true_model():
    return PhysicsModel(sim=SIM)


def goal_ahead(world, distance, tolerance=None):
    """Goal on the disk-1 to disk-2 axis, ``distance`` beyond disk 2."""
    target = world.disks[1]
    return Goal(
        position=(target.pose.x + distance, target.pose.y),
        tolerance=tolerance if tolerance is not None else target.radius / 10,
    )


class ActionTests(SimpleTestCase):

    def test_seventy_two_actions(self):
        actions = enumerate_actions()
        self.assertEqual(len(actions), 72)
        self.assertEqual([a.index for a in actions], list(range(72)))

    def test_extremal_midpoints(self):
        actions = enumerate_actions()
        self.assertAlmostEqual(min(a.push_angle for a in actions), -5 * math.pi / 36)
        self.assertAlmostEqual(min(a.contact_angle for a in actions), -11 * math.pi / 36)
        self.assertAlmostEqual(max(a.push_angle for a in actions), 5 * math.pi / 36)
        self.assertAlmostEqual(max(a.contact_angle for a in actions), 11 * math.pi / 36)

    def test_catalog_constant(self):
        self.assertEqual(enumerate_actions(), enumerate_actions())
        first = enumerate_actions()
        first.pop()
        self.assertEqual(len(enumerate_actions()), 72)

    def test_push_angle_major_order(self):
        actions = enumerate_actions()
        thetas = bin_midpoints(math.pi / 3, N_CONTACT_ANGLES)
        self.assertEqual([a.contact_angle for a in actions[:N_CONTACT_ANGLES]], thetas)
        self.assertEqual(len({a.push_angle for a in actions[:N_CONTACT_ANGLES]}), 1)

    def test_push_duration(self):
        action = enumerate_actions()[0]
        self.assertEqual(action.n_steps(DT), 48)
        self.assertAlmostEqual(action.n_steps(DT) * DT * action.push_speed, PUSH_LENGTH)

    def test_straight_geometry(self):
        start, direction = push_geometry((0.0, 0.0), (0.1, 0.0), 0.05, 0.005, 0.0, 0.0)
        assert_allclose(start, [-0.055, 0.0], atol=1e-15)
        assert_allclose(direction, [1.0, 0.0], atol=1e-15)

    def test_geometry_follows_axis(self):
        start, direction = push_geometry((0.0, 0.0), (0.0, 0.1), 0.05, 0.005, 0.0, 0.0)
        assert_allclose(start, [0.0, -0.055], atol=1e-15)
        assert_allclose(direction, [0.0, 1.0], atol=1e-15)

    def test_batched_geometry_matches_single(self):
        actions = enumerate_actions()
        n = len(actions)
        pos1, pos2 = np.array([0.01, -0.02]), np.array([0.1, 0.03])
        starts, directions = push_geometry(
            np.tile(pos1, (n, 1)), np.tile(pos2, (n, 1)), np.full(n, 0.05), 0.005,
            np.array([a.contact_angle for a in actions]), np.array([a.push_angle for a in actions]),
        )
        for k in (0, 17, 71):
            start, direction = push_geometry(pos1, pos2, 0.05, 0.005, actions[k].contact_angle, actions[k].push_angle)
            assert_allclose(starts[k], start, atol=1e-15)
            assert_allclose(directions[k], direction, atol=1e-15)

    def test_pusher_placed_tangent_and_at_rest(self):
        world = control_world()
        for action in enumerate_actions()[::7]:
            placed, velocity = place_pusher(world, action)
            gap = np.linalg.norm(np.array(placed.pusher.position) - world.disks[0].position)
            self.assertAlmostEqual(gap, world.disks[0].radius + world.pusher.radius, places=12)
            self.assertEqual(placed.pusher.velocity, (0.0, 0.0))
            self.assertTrue(placed.pusher.is_kinematic)
            self.assertAlmostEqual(float(np.linalg.norm(velocity)), action.push_speed)


class HeuristicTests(SimpleTestCase):

    def test_collinear(self):
        self.assertAlmostEqual(float(heuristic((0, 0), (0.1, 0), (0.2, 0))), 0.1)

    def test_goal_reached(self):
        self.assertEqual(float(heuristic((0, 0), (0.2, 0), (0.2, 0))), 0.0)

    def test_orthogonal(self):
        self.assertAlmostEqual(float(heuristic((0, 0), (0, 0.1), (0.1, 0))), math.sqrt(0.02) + 1.0, places=12)

    def test_degenerate_direction(self):
        self.assertAlmostEqual(float(heuristic((0.1, 0), (0.1, 0), (0.3, 0))), 0.2)
        self.assertAlmostEqual(float(heuristic((0.3, 0), (0.1, 0), (0.3, 0))), 0.2)

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(3)
        points = rng.uniform(-0.3, 0.3, size=(50, 3, 2))
        base = heuristic(points[:, 0], points[:, 1], points[:, 2])
        for angle in (0.3, -2.1, math.pi):
            rotation = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
            moved = points @ rotation.T + np.array([0.7, -1.3])
            cost = heuristic(moved[:, 0], moved[:, 1], moved[:, 2])
            assert_allclose(cost, base, rtol=0, atol=1e-12)

    def test_non_negative(self):
        rng = np.random.default_rng(4)
        points = rng.uniform(-1, 1, size=(200, 3, 2))
        self.assertTrue(np.all(heuristic(points[:, 0], points[:, 1], points[:, 2]) >= 0))


class GoalTests(SimpleTestCase):

    def test_goal_distance(self):
        world = control_world(radii=(0.054, 0.058))
        goal = sample_goal(world, EASY, np.random.default_rng(0))
        self.assertAlmostEqual(goal.distance(world.disks[1].position), 0.174, places=12)
        self.assertAlmostEqual(goal.tolerance, 0.0058)

    def test_easy_angles(self):
        rng = np.random.default_rng(1)
        angles = [goal_angle(EASY, rng) for _ in range(500)]
        self.assertTrue(all(abs(a) <= math.pi / 6 for a in angles))

    def test_hard_angles(self):
        rng = np.random.default_rng(2)
        angles = np.array([goal_angle(HARD, rng) for _ in range(500)])
        self.assertTrue(np.all((np.abs(angles) >= math.pi / 6) & (np.abs(angles) <= math.pi / 3)))
        self.assertTrue(np.any(angles > 0) and np.any(angles < 0))

    def test_goal_angle_relative_to_axis(self):
        world = control_world()
        goal = sample_goal(world, HARD, np.random.default_rng(5))
        offset = np.array(goal.position) - world.disks[1].position
        self.assertAlmostEqual(math.atan2(offset[1], offset[0]), goal.angle, places=12)

    def test_unknown_difficulty(self):
        with self.assertRaises(ValueError):
            goal_angle('medium', np.random.default_rng(0))

    def test_needs_two_disks(self):
        world = control_world()
        single = replace(world, disks=world.disks[:1])
        with self.assertRaises(PlanningError):
            sample_goal(single, EASY, np.random.default_rng(0))

    def test_tolerance_positive(self):
        with self.assertRaises(ValueError):
            Goal(position=(0.0, 0.0), tolerance=0.0)

    def test_control_world_touching(self):
        world = control_world()
        self.assertAlmostEqual(world.min_gap(), 0.0, places=12)

    def test_swap_disks(self):
        world = control_world()
        swapped = swap_disks(world)
        self.assertEqual(swapped.disks[0], world.disks[1])
        self.assertEqual(swapped.disks[1], world.disks[0])
        self.assertEqual(swapped.pusher, world.pusher)


class SearchTests(SimpleTestCase):

    def setUp(self):
        self.world = control_world()
        self.goal = goal_ahead(self.world, 0.1)

    def oracle(self, cost_fn=heuristic):
        actions = enumerate_actions()
        children = simulate_actions(
            true_model(), WorldBatch.from_world(self.world), actions, DT, GREEDY.settle_steps,
        )
        costs = cost_fn(children.pose[:, 0, :2], children.pose[:, 1, :2], np.array(self.goal.position))
        return actions[int(np.argmin(costs))]

    def test_horizon_switch(self):
        cfg = PlannerConfig()
        self.assertEqual(active_horizon(0.009, cfg), 3)
        self.assertEqual(active_horizon(0.050, cfg), 2)
        self.assertEqual(active_horizon(0.010, cfg), 2)

    def test_config_validation(self):
        with self.assertRaises(ValueError):
            PlannerConfig(horizon_near=0)
        with self.assertRaises(ValueError):
            PlannerConfig.from_dict({'beam_width': 4})
        self.assertEqual(PlannerConfig.from_dict(PlannerConfig().to_dict()), PlannerConfig())

    def test_simulated_push_moves_pusher_and_disks(self):
        action = enumerate_actions()[2 * N_CONTACT_ANGLES + 5]
        children = simulate_actions(true_model(), WorldBatch.from_world(self.world), [action], DT, 0)
        placed, _ = place_pusher(self.world, action)
        _, direction = push_geometry(
            self.world.disks[0].position, self.world.disks[1].position, self.world.disks[0].radius,
            self.world.pusher.radius, action.contact_angle, action.push_angle,
        )
        assert_allclose(children.pusher_pos[0], np.array(placed.pusher.position) + PUSH_LENGTH * direction, atol=1e-12)
        self.assertGreater(children.pose[0, 1, 0], self.world.disks[1].pose.x)

    def test_matches_exhaustive_oracle(self):
        chosen = plan_next(self.world, self.goal, true_model(), GREEDY, DT)
        self.assertEqual(chosen, self.oracle())

    def test_dead_ahead_goal_picks_central_bins(self):
        chosen = plan_next(self.world, self.goal, true_model(), GREEDY, DT)
        self.assertLessEqual(abs(chosen.contact_angle), math.pi / 36 + 1e-12)
        self.assertLessEqual(abs(chosen.push_angle), 3 * math.pi / 36 + 1e-12)

    def test_cost_scaling_keeps_choice(self):
        def scaled(p1, p2, goal):
            return 7.5 * heuristic(p1, p2, goal)

        model = true_model()
        self.assertEqual(
            plan_next(self.world, self.goal, model, GREEDY, DT, cost_fn=scaled),
            plan_next(self.world, self.goal, model, GREEDY, DT),
        )

    def test_capacity_fallback_is_greedy(self):
        cfg = PlannerConfig(horizon_near=2, horizon_far=2, queue_capacity=72)
        model = true_model()
        with mock.patch.object(model, 'predict', wraps=model.predict) as predict:
            chosen = plan_next(self.world, self.goal, model, cfg, DT)
        self.assertEqual(predict.call_count, 1)
        self.assertEqual(chosen, self.oracle())

    def test_deterministic(self):
        cfg = PlannerConfig(horizon_near=2, horizon_far=2, queue_capacity=300)
        model = true_model()
        self.assertEqual(plan_next(self.world, self.goal, model, cfg, DT), plan_next(self.world, self.goal, model, cfg, DT))

    def test_non_finite_predictions_rank_last(self):
        model = true_model()
        predict = model.predict

        def broken(batch, path):
            out = predict(batch, path)
            out['pose'][-1, :36] = np.nan
            return out

        with mock.patch.object(model, 'predict', side_effect=broken):
            chosen = plan_next(self.world, self.goal, model, GREEDY, DT)
        self.assertGreaterEqual(chosen.index, 36)


class EpisodeTests(SimpleTestCase):

    def setUp(self):
        self.world = control_world()

    def test_goal_already_reached(self):
        goal = Goal(position=tuple(self.world.disks[1].position), tolerance=0.005)
        model = mock.Mock()
        model.predict.side_effect = AssertionError("planner should not run")
        outcome = run_episode(self.world, model, goal, GREEDY, SIM)
        self.assertTrue(outcome.success)
        self.assertEqual(outcome.steps, 0)
        self.assertEqual(outcome.trajectory.n_states, 1)
        self.assertEqual(outcome.target_path.shape, (1, 2))

    def test_near_goal_reached(self):
        goal = goal_ahead(self.world, 0.012)
        outcome = run_episode(self.world, true_model(), goal, GREEDY, SIM)
        self.assertTrue(outcome.success)
        self.assertGreaterEqual(outcome.steps, 1)
        self.assertLessEqual(outcome.final_distance, goal.tolerance)
        steps_per_action = outcome.actions[0].n_steps(DT) + GREEDY.settle_steps
        self.assertEqual(outcome.trajectory.n_steps, outcome.steps * steps_per_action)
        self.assertEqual(len(outcome.target_path), outcome.steps + 1)
        payload = outcome.to_dict()
        self.assertEqual(payload['steps'], outcome.steps)
        self.assertEqual(len(payload['actions']), outcome.steps)

    def test_success_monotone_in_tolerance(self):
        tight = goal_ahead(self.world, 0.012)
        loose = replace(tight, tolerance=2 * tight.tolerance)
        first = run_episode(self.world, true_model(), tight, GREEDY, SIM)
        second = run_episode(self.world, true_model(), loose, GREEDY, SIM)
        self.assertTrue(first.success)
        self.assertTrue(second.success)
        self.assertLessEqual(second.steps, first.steps)

    def test_cap_bounds_episode(self):
        goal = goal_ahead(self.world, 0.15)
        cfg = replace(GREEDY, max_episode_actions=2)
        outcome = run_episode(self.world, true_model(), goal, cfg, SIM)
        self.assertFalse(outcome.success)
        self.assertEqual(outcome.steps, 2)

    def test_zero_cap_fails_without_planning(self):
        goal = goal_ahead(self.world, 0.1)
        cfg = replace(GREEDY, max_episode_actions=0)
        outcome = run_episode(self.world, mock.Mock(), goal, cfg, SIM)
        self.assertFalse(outcome.success)
        self.assertEqual(outcome.steps, 0)
        self.assertAlmostEqual(outcome.final_distance, 0.1, places=12)

    def test_needs_two_disks(self):
        single = replace(self.world, disks=self.world.disks[:1])
        with self.assertRaises(PlanningError):
            run_episode(single, true_model(), goal_ahead(self.world, 0.1), GREEDY, SIM)

    def test_execute_action_pushes_for_action_then_settles(self):
        action = enumerate_actions()[3 * N_CONTACT_ANGLES + 6]
        segment = execute_action(self.world, action, SIM, 24)
        self.assertEqual(segment.n_steps, 48 + 24)
        self.assertAlmostEqual(segment.pusher_displacement(), PUSH_LENGTH, places=9)
        assert_allclose(segment.commands[48:], 0.0)

    def test_concatenated_trajectory_continues_each_segment(self):
        actions = enumerate_actions()
        first = execute_action(self.world, actions[30], SIM, 4)
        second = execute_action(first.world_at(-1), actions[31], SIM, 4)
        joined = concatenate_segments([first, second], self.world, DT)
        self.assertEqual(joined.n_states, first.n_states + second.n_steps)
        assert_allclose(joined.pose[first.n_steps], first.pose[-1])
        assert_allclose(joined.pose[-1], second.pose[-1])

    def test_noisy_observation_keeps_true_success(self):
        goal = goal_ahead(self.world, 0.012)
        outcome = run_episode(
            self.world, true_model(), goal, GREEDY, SIM, sigma_pos=0.0005, sigma_rot=0.005,
            rng=np.random.default_rng(0),
        )
        self.assertEqual(outcome.success, outcome.final_distance <= goal.tolerance)

    def test_swapped_roles(self):
        world = WorldState(
            disks=(
                DiskState(pose=Pose2(0.0, 0.0), twist=Twist2(), mass=1.0, radius=0.059),
                DiskState(pose=Pose2(0.113, 0.0), twist=Twist2(), mass=0.9, radius=0.054),
            ),
            pusher=self.world.pusher,
            surface=self.world.surface,
        )
        swapped = swap_disks(world)
        goal = Goal(position=(-0.02, 0.0), tolerance=0.0059)
        outcome = run_episode(swapped, true_model(), goal, replace(GREEDY, max_episode_actions=1), SIM)
        self.assertEqual(outcome.steps, 1)
        self.assertLess(outcome.target_path[-1][0], outcome.target_path[0][0])
