"""
Goals and control scenes.

A goal lies three radii of disk 2 away from its center, at an angle to the
disk-1 to disk-2 axis drawn from the easy or hard interval.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from planner.exceptions import PlanningError
from planner.utils.actions import axis_heading
from sim_core.constants import PUSHER_RADIUS
from sim_core.utils.state import DiskState, Pose2, PusherState, SurfaceModel, Twist2, WorldState

EASY = 'easy'
HARD = 'hard'
DIFFICULTIES = [EASY, HARD]
GOAL_DISTANCE_RADII = 3.0
TOLERANCE_FRACTION = 0.1


@dataclass(frozen=True)
class Goal:
    position: tuple
    tolerance: float
    difficulty: str = EASY
    angle: float = 0.0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"Goal tolerance must be positive, got {self.tolerance}")
        object.__setattr__(self, 'position', (float(self.position[0]), float(self.position[1])))

    def distance(self, point):
        return float(math.hypot(point[0] - self.position[0], point[1] - self.position[1]))

    def reached(self, point):
        return self.distance(point) <= self.tolerance

    def to_dict(self):
        return {
            'position': list(self.position),
            'tolerance': self.tolerance,
            'difficulty': self.difficulty,
            'angle': self.angle,
        }


def goal_angle(difficulty, rng):
    """Easy: U(-pi/6, pi/6). Hard: |angle| ~ U(pi/6, pi/3) with a random sign."""
    if difficulty == EASY:
        return float(rng.uniform(-math.pi / 6, math.pi / 6))
    if difficulty == HARD:
        magnitude = rng.uniform(math.pi / 6, math.pi / 3)
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        return float(sign * magnitude)
    raise ValueError(f"Unknown difficulty '{difficulty}'. Allowed: {DIFFICULTIES}")


def sample_goal(world: WorldState, difficulty, rng, object_index=0, target_index=1):
    if world.n_disks < 2:
        raise PlanningError("Goals need a world with at least two disks")
    pushed, target = world.disks[object_index], world.disks[target_index]
    angle = goal_angle(difficulty, rng)
    heading = float(axis_heading(pushed.position, target.position)) + angle
    reach = GOAL_DISTANCE_RADII * target.radius
    position = target.position + reach * np.array([math.cos(heading), math.sin(heading)])
    return Goal(position=tuple(position), tolerance=TOLERANCE_FRACTION * target.radius,
                difficulty=difficulty, angle=angle)


def control_world(masses=(0.9, 1.0), radii=(0.054, 0.059), mu=0.15, surface=None, pusher_radius=PUSHER_RADIUS):
    """Two touching disks along +x with disk 1 at the origin; the pusher waits behind disk 1."""
    r1, r2 = radii
    disks = (
        DiskState(pose=Pose2(0.0, 0.0, 0.0), twist=Twist2(), mass=masses[0], radius=r1),
        DiskState(pose=Pose2(r1 + r2, 0.0, 0.0), twist=Twist2(), mass=masses[1], radius=r2),
    )
    pusher = PusherState(position=(-(r1 + pusher_radius), 0.0), radius=pusher_radius)
    return WorldState(disks=disks, pusher=pusher, surface=surface or SurfaceModel(mu_nominal=mu))


def swap_disks(world: WorldState):
    """Exchange the roles of disk 1 and disk 2, keeping their poses."""
    disks = list(world.disks)
    disks[0], disks[1] = disks[1], disks[0]
    return replace(world, disks=tuple(disks))
