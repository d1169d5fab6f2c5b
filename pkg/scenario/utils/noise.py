import logging
from dataclasses import replace

import numpy as np

from sim_core.exceptions import ContractViolation
from sim_core.utils.state import wrap_angle
from sim_core.utils.trajectory import Trajectory

logger = logging.getLogger(__name__)


def apply_observation_noise(trajectory: Trajectory, sigma_pos, sigma_rot, rng):
    """
    Corrupt observed disk poses with Gaussian noise.

    Positions get N(0, sigma_pos) per axis and headings N(0, sigma_rot).
    Every velocity is recomputed from the noisy poses: backward differences
    after the first state, matching the models' p' = p + dt * v' update, and
    a forward difference for the first state, which has no predecessor. A
    single-state trajectory keeps its velocity. The pusher track and the
    commands are left exact. Zero noise returns the trajectory itself.
    """
    if sigma_pos < 0 or sigma_rot < 0:
        raise ContractViolation(f"Noise levels must be non-negative, got {sigma_pos}, {sigma_rot}")
    if sigma_pos == 0 and sigma_rot == 0:
        return trajectory

    states, n = trajectory.pose.shape[:2]
    pose = trajectory.pose.copy()
    pose[..., :2] += rng.normal(scale=sigma_pos, size=(states, n, 2)) if sigma_pos > 0 else 0.0
    if sigma_rot > 0:
        pose[..., 2] = wrap_angle(pose[..., 2] + rng.normal(scale=sigma_rot, size=(states, n)))

    twist = trajectory.twist.copy()
    if states > 1:
        twist[1:, :, :2] = (pose[1:, :, :2] - pose[:-1, :, :2]) / trajectory.dt
        twist[1:, :, 2] = wrap_angle(pose[1:, :, 2] - pose[:-1, :, 2]) / trajectory.dt
        twist[0] = twist[1]
    return replace(trajectory, pose=pose, twist=twist)
