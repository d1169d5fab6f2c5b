"""
The discrete push repertoire: 6 push angles times 12 contact angles, every
push 10 mm at 50 mm/s.

Contact angle theta places the pusher on the rim of disk 1, measured from
the disk-2-to-disk-1 axis; push angle alpha rotates the push direction away
from the pusher-to-center line.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from sim_core.utils.state import WorldState

PUSH_LENGTH = 0.010
PUSH_SPEED = 0.050
PUSH_ANGLE_LIMIT = math.pi / 6
CONTACT_ANGLE_LIMIT = math.pi / 3
N_PUSH_ANGLES = 6
N_CONTACT_ANGLES = 12


@dataclass(frozen=True)
class ControlAction:
    index: int
    contact_angle: float
    push_angle: float
    push_length: float = PUSH_LENGTH
    push_speed: float = PUSH_SPEED

    def n_steps(self, dt):
        return int(round(self.push_length / self.push_speed / dt))

    def to_dict(self):
        return {
            'index': self.index,
            'contact_angle': self.contact_angle,
            'push_angle': self.push_angle,
            'push_length': self.push_length,
            'push_speed': self.push_speed,
        }


def bin_midpoints(limit, n):
    width = 2.0 * limit / n
    return [-limit + width * (k + 0.5) for k in range(n)]


@lru_cache(maxsize=1)
def _catalog():
    return tuple(
        ControlAction(index=a * N_CONTACT_ANGLES + t, contact_angle=theta, push_angle=alpha)
        for a, alpha in enumerate(bin_midpoints(PUSH_ANGLE_LIMIT, N_PUSH_ANGLES))
        for t, theta in enumerate(bin_midpoints(CONTACT_ANGLE_LIMIT, N_CONTACT_ANGLES))
    )


def enumerate_actions():
    """All 72 actions, push-angle major, in index order."""
    return list(_catalog())


def axis_heading(pos1, pos2):
    """Heading of the disk-1 to disk-2 axis; 0 when the centers coincide."""
    delta = np.asarray(pos2, dtype=float) - np.asarray(pos1, dtype=float)
    degenerate = np.hypot(delta[..., 0], delta[..., 1]) < 1e-12
    return np.where(degenerate, 0.0, np.arctan2(delta[..., 1], delta[..., 0]))


def push_geometry(pos1, pos2, radius1, pusher_radius, contact_angle, push_angle):
    """
    Pusher start position and unit push direction.

    Works on single positions or on batches with a leading dimension.
    """
    phi = axis_heading(pos1, pos2)
    placement = phi + contact_angle
    gap = np.asarray(radius1) + pusher_radius
    start = np.asarray(pos1, dtype=float) - np.stack([np.cos(placement), np.sin(placement)], axis=-1) * \
        np.asarray(gap)[..., None]
    heading = placement + push_angle
    direction = np.stack([np.cos(heading), np.sin(heading)], axis=-1)
    return start, direction


def pusher_path(start, direction, action: ControlAction, dt, settle_steps=0):
    """
    Pusher positions (T+1, ..., 2) for one push followed by a still pusher.
    """
    steps = action.n_steps(dt)
    velocity = action.push_speed * np.asarray(direction, dtype=float)
    path = [np.asarray(start, dtype=float)]
    for _ in range(steps):
        path.append(path[-1] + dt * velocity)
    path.extend([path[-1]] * settle_steps)
    return np.stack(path)


def place_pusher(world: WorldState, action: ControlAction, object_index=0, target_index=1):
    """World with the kinematic pusher at rest, tangent to the pushed disk, and the push velocity."""
    disks = world.disks
    start, direction = push_geometry(
        disks[object_index].position, disks[target_index].position, disks[object_index].radius,
        world.pusher.radius, action.contact_angle, action.push_angle,
    )
    placed = world.with_pusher(position=tuple(start), velocity=(0.0, 0.0), mass=None)
    return placed, action.push_speed * direction
