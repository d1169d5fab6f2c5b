"""
Dataset records: a ground-truth trajectory plus the nominal-engine shadow
rollouts SAIN trains against, and the parameters it was generated with.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from sim_core.exceptions import ContractViolation
from sim_core.utils.trajectory import Trajectory

DATASET_FORMAT_VERSION = 1
UNITS = {'length': 'm', 'angle': 'rad', 'time': 's', 'mass': 'kg'}


@dataclass(eq=False)
class ShadowWindow:
    """Nominal-engine rollout restarted from the true state at ``start``."""
    start: int
    pose: np.ndarray    # (W+1, n, 3)
    twist: np.ndarray   # (W+1, n, 3)

    @property
    def length(self):
        return self.pose.shape[0] - 1

    def equals(self, other):
        return (self.start == other.start and np.array_equal(self.pose, other.pose)
                and np.array_equal(self.twist, other.twist))


@dataclass(eq=False)
class TrajectoryRecord:
    index: int
    trajectory: Trajectory
    shadows: List[ShadowWindow] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def shadow_at(self, start, length) -> Optional[ShadowWindow]:
        for window in self.shadows:
            if window.start == start and window.length >= length:
                return window
        return None

    def equals(self, other):
        return (
            self.index == other.index
            and self.params == other.params
            and self.trajectory.equals(other.trajectory)
            and len(self.shadows) == len(other.shadows)
            and all(a.equals(b) for a, b in zip(self.shadows, other.shadows))
        )


@dataclass(eq=False)
class Dataset:
    metadata: dict
    records: List[TrajectoryRecord] = field(default_factory=list)

    def __post_init__(self):
        self.metadata.setdefault('version', DATASET_FORMAT_VERSION)
        self.metadata.setdefault('units', dict(UNITS))
        dts = {r.trajectory.dt for r in self.records}
        if len(dts) > 1:
            raise ContractViolation(f"Dataset mixes step sizes {sorted(dts)}")
        if self.records and 'dt' in self.metadata and self.metadata['dt'] != self.records[0].trajectory.dt:
            raise ContractViolation("Dataset header dt differs from its trajectories")

    def __len__(self):
        return len(self.records)

    @property
    def dt(self):
        return self.metadata.get('dt')

    def subset(self, indices):
        return Dataset(metadata=dict(self.metadata), records=[self.records[i] for i in indices])

    def equals(self, other):
        return (self.metadata == other.metadata and len(self) == len(other)
                and all(a.equals(b) for a, b in zip(self.records, other.records)))
