"""
The fixed-parameter engine embedded in SAIN.

It replays the recorded pusher path with a kinematic pusher on a uniform
surface of nominal friction. Disk masses are the nominal estimates by
object index (the last value is reused for extra objects); radii are
observed geometry and are taken from the state.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from dynamics_models.utils.features import engine_deltas
from sim_core.utils.batch import WorldBatch
from sim_core.utils.engine import rollout_batch
from sim_core.utils.state import SimConfig, SurfaceModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NominalEngine:
    masses: Tuple[float, ...] = (0.896, 1.1)
    radii: Tuple[float, ...] = (0.0525, 0.058)
    mu: float = 0.15
    sim: SimConfig = field(default_factory=SimConfig)
    use_observed_radii: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'masses', tuple(float(m) for m in self.masses))
        object.__setattr__(self, 'radii', tuple(float(r) for r in self.radii))
        if not self.masses or not self.radii:
            raise ValueError("NominalEngine needs at least one mass and one radius")
        if not all(m > 0 for m in self.masses) or not all(r > 0 for r in self.radii):
            raise ValueError("NominalEngine masses and radii must be positive")
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"NominalEngine.mu must lie in (0, 1), got {self.mu}")

    @classmethod
    def from_dict(cls, data, sim=None):
        data = dict(data or {})
        return cls(
            masses=tuple(data.get('masses', cls.masses)),
            radii=tuple(data.get('radii', cls.radii)),
            mu=data.get('mu', cls.mu),
            use_observed_radii=data.get('use_observed_radii', True),
            sim=sim or SimConfig(),
        )

    def to_dict(self):
        return {
            'masses': list(self.masses),
            'radii': list(self.radii),
            'mu': self.mu,
            'use_observed_radii': self.use_observed_radii,
            'sim': self.sim.to_dict(),
        }

    def per_object(self, values, n):
        return np.array([values[min(i, len(values) - 1)] for i in range(n)])

    def nominal_batch(self, batch: WorldBatch, pusher_start=None):
        """Same poses and twists with nominal statics, a kinematic pusher and a uniform surface."""
        n = batch.n_disks
        mass = np.broadcast_to(self.per_object(self.masses, n), batch.mass.shape).copy()
        radius = batch.radius.copy() if self.use_observed_radii else \
            np.broadcast_to(self.per_object(self.radii, n), batch.radius.shape).copy()
        return replace(
            batch.copy(),
            mass=mass,
            radius=radius,
            pusher_pos=batch.pusher_pos.copy() if pusher_start is None else np.array(pusher_start, dtype=float),
            pusher_vel=np.zeros_like(batch.pusher_vel),
            pusher_mass=None,
            surface=SurfaceModel(mu_nominal=self.mu, gravity=batch.surface.gravity),
        )

    def replay(self, batch: WorldBatch, pusher_path):
        """
        Roll the nominal engine along a pusher path.

        Args:
            batch: true initial states
            pusher_path: (T+1, B, 2) pusher positions; the pusher starts at
                pusher_path[0] and moves with velocity (path[t+1] - path[t]) / dt

        Returns:
            dict: engine rollout with 'pose' and 'twist' of shape (T+1, B, n, 3)
        """
        path = np.asarray(pusher_path, dtype=float)
        commands = (path[1:] - path[:-1]) / self.sim.dt
        start = self.nominal_batch(batch, pusher_start=path[0])
        return rollout_batch(start, commands, self.sim)

    def deltas(self, batch: WorldBatch, pusher_path):
        """Per-step engine deltas (dvel (T, B, n, 3), dpose (T, B, n, 4)) along a pusher path."""
        rollout = self.replay(batch, pusher_path)
        return engine_deltas(rollout['pose'], rollout['twist'])
