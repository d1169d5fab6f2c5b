"""
Recorded state sequences at a fixed step.

A Trajectory holds T+1 states and the T pusher commands between them.
Statics (mass, radius, pusher, surface) are stored once.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from sim_core.exceptions import ContractViolation
from sim_core.utils.batch import WorldBatch
from sim_core.utils.contacts import ContactDiagnostics
from sim_core.utils.state import SurfaceModel


@dataclass(eq=False)
class Trajectory:
    dt: float
    pose: np.ndarray          # (T+1, n, 3)
    twist: np.ndarray         # (T+1, n, 3)
    mass: np.ndarray          # (n,)
    radius: np.ndarray        # (n,)
    pusher_pos: np.ndarray    # (T+1, 2)
    pusher_vel: np.ndarray    # (T+1, 2)
    commands: np.ndarray      # (T, 2)
    pusher_radius: float
    pusher_mass: Optional[float] = None
    surface: SurfaceModel = field(default_factory=SurfaceModel)
    diagnostics: ContactDiagnostics = field(default_factory=ContactDiagnostics)

    def __post_init__(self):
        steps, n = self.pose.shape[0] - 1, self.pose.shape[1]
        if steps < 0:
            raise ContractViolation("Trajectory needs at least one state")
        expected = {
            'pose': (steps + 1, n, 3), 'twist': (steps + 1, n, 3),
            'mass': (n,), 'radius': (n,),
            'pusher_pos': (steps + 1, 2), 'pusher_vel': (steps + 1, 2),
            'commands': (steps, 2),
        }
        for name, shape in expected.items():
            if np.shape(getattr(self, name)) != shape:
                raise ContractViolation(f"Trajectory.{name} has shape {np.shape(getattr(self, name))}, expected {shape}")

    @property
    def n_steps(self):
        return self.commands.shape[0]

    @property
    def n_states(self):
        return self.pose.shape[0]

    @property
    def n_disks(self):
        return self.mass.shape[0]

    def batch_at(self, k):
        """State k as a batch of one."""
        return WorldBatch(
            pose=self.pose[k][None].copy(),
            twist=self.twist[k][None].copy(),
            mass=self.mass[None].copy(),
            radius=self.radius[None].copy(),
            pusher_pos=self.pusher_pos[k][None].copy(),
            pusher_vel=self.pusher_vel[k][None].copy(),
            pusher_radius=self.pusher_radius,
            pusher_mass=self.pusher_mass,
            surface=self.surface,
        )

    def world_at(self, k):
        return self.batch_at(k).world(0)

    def window(self, start, stop):
        """States start..stop (inclusive) with the commands between them."""
        if not 0 <= start < stop <= self.n_steps:
            raise ContractViolation(f"Window [{start}, {stop}] outside trajectory of {self.n_steps} steps")
        return replace(
            self,
            pose=self.pose[start:stop + 1].copy(),
            twist=self.twist[start:stop + 1].copy(),
            pusher_pos=self.pusher_pos[start:stop + 1].copy(),
            pusher_vel=self.pusher_vel[start:stop + 1].copy(),
            commands=self.commands[start:stop].copy(),
            diagnostics=ContactDiagnostics(),
        )

    def pusher_displacement(self):
        return float(np.linalg.norm(self.pusher_pos[-1] - self.pusher_pos[0]))

    def with_disk_order(self, order):
        """Relabel disks: new disk k is old disk order[k]."""
        order = np.asarray(order, dtype=int)
        return replace(
            self,
            pose=self.pose[:, order].copy(), twist=self.twist[:, order].copy(),
            mass=self.mass[order].copy(), radius=self.radius[order].copy(),
        )

    def equals(self, other):
        """Exact equality of every stored field."""
        if not isinstance(other, Trajectory):
            return False
        arrays = ('pose', 'twist', 'mass', 'radius', 'pusher_pos', 'pusher_vel', 'commands')
        return (
            self.dt == other.dt
            and self.pusher_radius == other.pusher_radius
            and self.pusher_mass == other.pusher_mass
            and self.surface.to_dict() == other.surface.to_dict()
            and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
        )
