"""
Ground friction for flat-bottomed disks: Coulomb sliding force plus the
uniform-pressure spin torque (2/3) mu m g r.
"""

import math

import numpy as np

from sim_core.constants import SPIN_DEADBAND, VELOCITY_DEADBAND

SPIN_TORQUE_FACTOR = 2.0 / 3.0


def coulomb_friction(disk, surface):
    """
    Ground friction acting on a single disk.

    Args:
        disk (DiskState): the disk, mu is looked up at its center
        surface (SurfaceModel): supporting surface

    Returns:
        tuple: (force as np.ndarray of shape (2,) in N, torque in N*m)

    Example:
        >>> force, torque = coulomb_friction(disk_1kg_moving_at_0_1, SurfaceModel(mu_nominal=0.2))
        >>> force
        array([-1.962,  0.   ])
    """
    mu = float(surface.mu_at(disk.position))
    normal = mu * disk.mass * surface.gravity

    force = np.zeros(2)
    speed = disk.twist.speed
    if speed > VELOCITY_DEADBAND:
        force = -normal * np.array([disk.twist.vx, disk.twist.vy]) / speed

    torque = 0.0
    if abs(disk.twist.omega) > SPIN_DEADBAND:
        torque = -SPIN_TORQUE_FACTOR * normal * disk.radius * math.copysign(1.0, disk.twist.omega)

    return force, torque


def apply_ground_friction(twist, radius, mu, gravity, dt):
    """
    Apply one step of ground friction to batched disk twists.

    The velocity change is clamped so friction can stop a disk but never
    reverse it; below the deadbands nothing is applied.

    Args:
        twist: (B, n, 3) array of vx, vy, omega
        radius: (B, n) disk radii
        mu: (B, n) friction coefficients at the disk centers
        gravity: gravitational acceleration
        dt: step length

    Returns:
        np.ndarray: new (B, n, 3) twist
    """
    out = twist.copy()

    speed = np.hypot(twist[..., 0], twist[..., 1])
    moving = speed > VELOCITY_DEADBAND
    dv = mu * gravity * dt
    scale = np.where(moving, np.maximum(speed - dv, 0.0) / np.where(moving, speed, 1.0), 1.0)
    out[..., 0] = twist[..., 0] * scale
    out[..., 1] = twist[..., 1] * scale

    # torque / inertia = (2/3) mu m g r / (m r^2 / 2)
    omega = twist[..., 2]
    spinning = np.abs(omega) > SPIN_DEADBAND
    dw = 2.0 * SPIN_TORQUE_FACTOR * mu * gravity / radius * dt
    out[..., 2] = np.where(spinning, np.sign(omega) * np.maximum(np.abs(omega) - dw, 0.0), omega)
    return out
