"""
Batched World Arrays
====================
Array form of one or more worlds that share a surface. The engine, the
planner's candidate expansion and the force calibration all step a leading
batch dimension at once; every operation is element-wise along it, so a
batch of one gives the same bits as any larger batch.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from sim_core.exceptions import ContractViolation
from sim_core.utils.state import DiskState, Pose2, PusherState, SurfaceModel, Twist2, WorldState, wrap_angle


@dataclass
class WorldBatch:
    pose: np.ndarray          # (B, n, 3) x, y, theta
    twist: np.ndarray         # (B, n, 3) vx, vy, omega
    mass: np.ndarray          # (B, n)
    radius: np.ndarray        # (B, n)
    pusher_pos: np.ndarray    # (B, 2)
    pusher_vel: np.ndarray    # (B, 2)
    pusher_radius: float
    pusher_mass: Optional[float]
    surface: SurfaceModel

    def __post_init__(self):
        b, n = self.mass.shape
        expected = {
            'pose': (b, n, 3), 'twist': (b, n, 3), 'radius': (b, n),
            'pusher_pos': (b, 2), 'pusher_vel': (b, 2),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ContractViolation(f"WorldBatch.{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def batch_size(self):
        return self.mass.shape[0]

    @property
    def n_disks(self):
        return self.mass.shape[1]

    @classmethod
    def from_world(cls, world, batch_size=1):
        pose = np.array([[d.pose.x, d.pose.y, d.pose.theta] for d in world.disks], dtype=float).reshape(-1, 3)
        twist = np.array([[d.twist.vx, d.twist.vy, d.twist.omega] for d in world.disks], dtype=float).reshape(-1, 3)
        mass = np.array([d.mass for d in world.disks], dtype=float)
        radius = np.array([d.radius for d in world.disks], dtype=float)
        return cls(
            pose=np.repeat(pose[None], batch_size, axis=0),
            twist=np.repeat(twist[None], batch_size, axis=0),
            mass=np.repeat(mass[None], batch_size, axis=0),
            radius=np.repeat(radius[None], batch_size, axis=0),
            pusher_pos=np.tile(np.array(world.pusher.position, dtype=float), (batch_size, 1)),
            pusher_vel=np.tile(np.array(world.pusher.velocity, dtype=float), (batch_size, 1)),
            pusher_radius=world.pusher.radius,
            pusher_mass=world.pusher.mass,
            surface=world.surface,
        )

    def world(self, index=0):
        """Convert one batch element back to a WorldState."""
        disks = tuple(
            DiskState(
                pose=Pose2(*self.pose[index, i]),
                twist=Twist2(*self.twist[index, i]),
                mass=float(self.mass[index, i]),
                radius=float(self.radius[index, i]),
            )
            for i in range(self.n_disks)
        )
        pusher = PusherState(
            position=tuple(self.pusher_pos[index]),
            velocity=tuple(self.pusher_vel[index]),
            radius=self.pusher_radius,
            mass=self.pusher_mass,
        )
        return WorldState(disks=disks, pusher=pusher, surface=self.surface)

    def copy(self):
        return replace(
            self,
            pose=self.pose.copy(), twist=self.twist.copy(),
            mass=self.mass.copy(), radius=self.radius.copy(),
            pusher_pos=self.pusher_pos.copy(), pusher_vel=self.pusher_vel.copy(),
        )

    def take(self, indices):
        """Select (or repeat) batch elements."""
        idx = np.asarray(indices, dtype=int)
        return replace(
            self,
            pose=self.pose[idx].copy(), twist=self.twist[idx].copy(),
            mass=self.mass[idx].copy(), radius=self.radius[idx].copy(),
            pusher_pos=self.pusher_pos[idx].copy(), pusher_vel=self.pusher_vel[idx].copy(),
        )

    def normalized(self):
        out = self.copy()
        out.pose[..., 2] = wrap_angle(out.pose[..., 2])
        return out

    def kinetic_energy(self):
        """Disk kinetic energy per batch element (translation + spin of a uniform disk)."""
        linear = 0.5 * self.mass * (self.twist[..., 0] ** 2 + self.twist[..., 1] ** 2)
        spin = 0.25 * self.mass * self.radius ** 2 * self.twist[..., 2] ** 2
        return (linear + spin).sum(axis=-1)
