"""
Scene sampling: disk 1 at the origin, every further disk tangent to the
previous one, the pusher tangent behind disk 1.
"""

import logging
import math
from typing import Optional

import numpy as np

from scenario.exceptions import SceneSamplingError
from scenario.utils.specs import PushSpec, SceneSpec
from sim_core.utils.state import DiskState, Pose2, PusherState, SurfaceModel, Twist2, WorldState

logger = logging.getLogger(__name__)


def chain_positions(radii, placement):
    """Centers of a tangent chain: disk k+1 touches disk k at heading placement[:k+1].sum()."""
    positions = [np.zeros(2)]
    heading = 0.0
    for k, angle in enumerate(placement):
        heading += angle
        gap = radii[k] + radii[k + 1]
        positions.append(positions[-1] + gap * np.array([math.cos(heading), math.sin(heading)]))
    return np.array(positions)


def _overlaps(positions, radii):
    n = len(radii)
    for i in range(n):
        for j in range(i + 2, n):
            if np.linalg.norm(positions[j] - positions[i]) < radii[i] + radii[j]:
                return True
    return False


def pusher_start(disk_position, disk_radius, pusher_radius, heading):
    """Pusher center tangent to a disk, on the side opposite ``heading``."""
    gap = disk_radius + pusher_radius
    return np.asarray(disk_position, dtype=float) - gap * np.array([math.cos(heading), math.sin(heading)])


def sample_scene_params(spec: SceneSpec, push: PushSpec, rng, index=0):
    """
    Draw one scene's parameters.

    Draw order: mu, masses, radii, placement angles (redrawn on overlap),
    pusher angle, push direction.

    Returns:
        dict: JSON-ready parameters
    """
    n = spec.n_disks
    mu = float(rng.uniform(*spec.mu_range))
    masses = rng.uniform(*spec.mass_range, size=n)
    radii = rng.uniform(*spec.radius_range, size=n)

    for attempt in range(spec.max_tries):
        placement = rng.uniform(*spec.placement_range, size=n - 1)
        positions = chain_positions(radii, placement)
        if not _overlaps(positions, radii):
            break
        logger.debug(f"Scene {index}: placement attempt {attempt + 1} overlaps, redrawing")
    else:
        raise SceneSamplingError(index, f"no overlap-free placement in {spec.max_tries} tries")

    return {
        'mu': mu,
        'masses': masses.tolist(),
        'radii': radii.tolist(),
        'placement': placement.tolist(),
        'pusher_angle': float(rng.uniform(*push.pusher_angle_range)),
        'push_direction': float(rng.uniform(*push.push_direction_range)),
    }


def push_heading(params):
    return params['pusher_angle'] + params['push_direction']


def build_scene(params, push: PushSpec, surface: Optional[SurfaceModel] = None, dynamic_pusher=False):
    """WorldState for sampled parameters; a uniform surface of the sampled mu unless one is given."""
    radii = np.asarray(params['radii'], dtype=float)
    positions = chain_positions(radii, params['placement'])
    disks = tuple(
        DiskState(pose=Pose2(float(x), float(y), 0.0), twist=Twist2(), mass=float(m), radius=float(r))
        for (x, y), m, r in zip(positions, params['masses'], radii)
    )
    start = pusher_start(positions[0], radii[0], push.pusher_radius, params['pusher_angle'])
    pusher = PusherState(
        position=tuple(start),
        radius=push.pusher_radius,
        mass=push.pusher_mass if dynamic_pusher else None,
    )
    return WorldState(disks=disks, pusher=pusher, surface=surface or SurfaceModel(mu_nominal=params['mu']))


def sample_scene(spec: SceneSpec, rng, push: Optional[PushSpec] = None):
    """
    Sample a WorldState: disk 1 at the origin, tangent neighbors, the
    pusher tangent behind disk 1 and at rest.
    """
    push = push or PushSpec()
    return build_scene(sample_scene_params(spec, push, rng), push)
