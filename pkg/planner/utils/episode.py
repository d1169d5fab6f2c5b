"""
Closed-loop Episodes
====================
Plan with a forward model, execute the chosen push in the true world,
observe, and replan until disk 2 is within tolerance of the goal or the
action cap is spent.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from planner.exceptions import PlanningError
from planner.utils.actions import ControlAction, place_pusher
from planner.utils.goals import Goal
from planner.utils.heuristic import heuristic
from planner.utils.search import PlannerConfig, plan_next
from sim_core.utils.batch import WorldBatch
from sim_core.utils.contacts import ContactDiagnostics
from sim_core.utils.engine import rollout_physics
from sim_core.utils.state import Pose2, SimConfig, WorldState, wrap_angle
from sim_core.utils.trajectory import Trajectory

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class EpisodeOutcome:
    success: bool
    goal: Goal
    trajectory: Trajectory
    actions: List[ControlAction] = field(default_factory=list)
    segments: List[Trajectory] = field(default_factory=list)
    target_path: Optional[np.ndarray] = None   # (steps+1, 2) disk-2 center at each observation
    final_distance: float = 0.0

    @property
    def steps(self):
        return len(self.actions)

    def to_dict(self):
        return {
            'success': self.success,
            'steps': self.steps,
            'final_distance': self.final_distance,
            'goal': self.goal.to_dict(),
            'actions': [a.index for a in self.actions],
            'target_path': self.target_path.tolist(),
        }


def _single_state(world: WorldState, dt):
    b = WorldBatch.from_world(world)
    return Trajectory(
        dt=dt, pose=b.pose.copy(), twist=b.twist.copy(), mass=b.mass[0].copy(), radius=b.radius[0].copy(),
        pusher_pos=b.pusher_pos.copy(), pusher_vel=b.pusher_vel.copy(), commands=np.zeros((0, 2)),
        pusher_radius=b.pusher_radius, pusher_mass=b.pusher_mass, surface=b.surface,
    )


def concatenate_segments(segments, initial: WorldState, dt):
    """
    One trajectory through all executed pushes. The pusher jump between a
    push's end and the next placement is not recorded.
    """
    if not segments:
        return _single_state(initial, dt)
    first, rest = segments[0], segments[1:]
    diagnostics = ContactDiagnostics()
    for segment in segments:
        diagnostics.merge(segment.diagnostics)

    def join(name):
        return np.concatenate([getattr(first, name)] + [getattr(s, name)[1:] for s in rest])

    return replace(
        first,
        pose=join('pose'), twist=join('twist'), pusher_pos=join('pusher_pos'), pusher_vel=join('pusher_vel'),
        commands=np.concatenate([s.commands for s in segments]),
        diagnostics=diagnostics,
    )


def observe(world: WorldState, sigma_pos, sigma_rot, rng):
    """Disk poses as a noisy sensor would report them; velocities are kept."""
    if rng is None or (sigma_pos == 0 and sigma_rot == 0):
        return world
    disks = []
    for disk in world.disks:
        dx, dy = rng.normal(scale=sigma_pos, size=2) if sigma_pos > 0 else (0.0, 0.0)
        dtheta = rng.normal(scale=sigma_rot) if sigma_rot > 0 else 0.0
        pose = Pose2(disk.pose.x + dx, disk.pose.y + dy, float(wrap_angle(disk.pose.theta + dtheta)))
        disks.append(replace(disk, pose=pose))
    return replace(world, disks=tuple(disks))


def execute_action(world: WorldState, action: ControlAction, sim: SimConfig, settle_steps, object_index=0,
                   target_index=1):
    """The push in the true world at the push speed, then a still pusher for ``settle_steps``."""
    placed, velocity = place_pusher(world, action, object_index, target_index)
    plan = np.concatenate([
        np.tile(velocity, (action.n_steps(sim.dt), 1)),
        np.zeros((settle_steps, 2)),
    ])
    return rollout_physics(placed, plan, sim)


def run_episode(world: WorldState, model, goal: Goal, cfg: PlannerConfig, sim: SimConfig, object_index=0,
                target_index=1, cost_fn=heuristic, sigma_pos=0.0, sigma_rot=0.0, rng=None):
    """
    Push disk 2 toward ``goal``.

    Args:
        world: initial true state, executed by the engine with ``sim``
        model: planning ForwardModel; never used to advance the true world
        goal: target for disk 2
        cfg: PlannerConfig (horizons, cap, settle steps)
        sigma_pos, sigma_rot: observation noise fed to the planner (needs ``rng``)

    Returns:
        EpisodeOutcome: success is judged on the true disk-2 center

    Raises:
        PlanningError: world without the two disks the task refers to
    """
    if world.n_disks < 2 or max(object_index, target_index) >= world.n_disks or object_index == target_index:
        raise PlanningError(
            f"Episode needs distinct disks {object_index} and {target_index}, world has {world.n_disks}",
        )

    true_world = world
    segments, actions = [], []
    path = [np.array(true_world.disks[target_index].position)]

    while not goal.reached(true_world.disks[target_index].position):
        if len(actions) >= cfg.max_episode_actions:
            break
        observed = observe(true_world, sigma_pos, sigma_rot, rng)
        action = plan_next(observed, goal, model, cfg, sim.dt, cost_fn, object_index, target_index)
        segment = execute_action(true_world, action, sim, cfg.settle_steps, object_index, target_index)
        true_world = segment.world_at(-1)
        segments.append(segment)
        actions.append(action)
        path.append(np.array(true_world.disks[target_index].position))
        logger.debug(
            f"Action {len(actions)}: #{action.index}, disk 2 at {goal.distance(path[-1]) * 1e3:.2f} mm from goal",
        )

    distance = goal.distance(true_world.disks[target_index].position)
    success = distance <= goal.tolerance
    logger.info(
        f"Episode {'succeeded' if success else 'failed'} after {len(actions)} actions "
        f"({goal.difficulty}, final distance {distance * 1e3:.2f} mm)",
    )
    return EpisodeOutcome(
        success=success,
        goal=goal,
        trajectory=concatenate_segments(segments, world, sim.dt),
        actions=actions,
        segments=segments,
        target_path=np.stack(path),
        final_distance=distance,
    )
