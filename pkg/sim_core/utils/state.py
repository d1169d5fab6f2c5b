"""
World State Types
=================
Value types for disks, the pusher, the supporting surface and the engine
configuration. Everything here is immutable; the engine copies state from
step to step.
"""

import math
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from sim_core.constants import (
    DEFAULT_DT,
    GRAVITY,
    PUSHER_RADIUS,
    SURFACE_MODES,
    SURFACE_SPATIAL_FIELD,
    SURFACE_UNIFORM,
)

logger = logging.getLogger(__name__)


def wrap_angle(theta):
    """
    Map an angle, or an array of angles, into (-pi, pi].

    Example:
        >>> wrap_angle(3 * math.pi / 2)
        -1.5707963267948966
        >>> wrap_angle(-math.pi)
        3.141592653589793
    """
    theta = np.asarray(theta, dtype=float)
    inside = (theta > -np.pi) & (theta <= np.pi)
    # in-range values pass through untouched so wrapping is idempotent bitwise
    wrapped = np.where(inside, theta, np.pi - np.mod(np.pi - theta, 2.0 * np.pi))
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def _require_finite(name, *values):
    for value in values:
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class Pose2:
    """Planar pose: position in meters, heading in radians."""
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        _require_finite('Pose2', self.x, self.y, self.theta)
        object.__setattr__(self, 'theta', wrap_angle(self.theta))

    def as_array(self):
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class Twist2:
    """Planar velocity: linear in m/s, angular in rad/s."""
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        _require_finite('Twist2', self.vx, self.vy, self.omega)

    def as_array(self):
        return np.array([self.vx, self.vy, self.omega])

    @property
    def speed(self):
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class DiskState:
    pose: Pose2
    twist: Twist2
    mass: float
    radius: float

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"Disk mass must be positive, got {self.mass}")
        if not self.radius > 0:
            raise ValueError(f"Disk radius must be positive, got {self.radius}")

    @property
    def position(self):
        return np.array([self.pose.x, self.pose.y])


@dataclass(frozen=True)
class PusherState:
    """
    Cylindrical pusher.

    ``mass`` is None for the position-controlled (kinematic) pusher of the
    robot-control setup; a number makes it the dynamic body of the
    direct-force setup. Contact impulses never change a kinematic pusher.
    """
    position: Tuple[float, float] = (0.0, 0.0)
    velocity: Tuple[float, float] = (0.0, 0.0)
    radius: float = PUSHER_RADIUS
    mass: Optional[float] = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"Pusher radius must be positive, got {self.radius}")
        if self.mass is not None and not self.mass > 0:
            raise ValueError(f"Dynamic pusher mass must be positive, got {self.mass}")
        object.__setattr__(self, 'position', (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, 'velocity', (float(self.velocity[0]), float(self.velocity[1])))

    @property
    def is_kinematic(self):
        return self.mass is None


@dataclass(frozen=True, eq=False)
class SurfaceModel:
    """
    Supporting surface friction.

    In ``spatial_field`` mode the friction coefficient is bilinearly
    interpolated from ``mu_field`` (indexed ``[ix, iy]``) whose node (0, 0)
    sits at ``field_origin`` with ``field_spacing`` meters between nodes.
    Lookups outside the grid clamp to the border.
    """
    mode: str = SURFACE_UNIFORM
    mu_nominal: float = 0.15
    mu_field: Optional[np.ndarray] = None
    field_origin: Tuple[float, float] = (0.0, 0.0)
    field_spacing: float = 0.01
    gravity: float = GRAVITY

    def __post_init__(self):
        if self.mode not in SURFACE_MODES:
            raise ValueError(f"Unknown surface mode '{self.mode}'. Allowed: {SURFACE_MODES}")
        if not 0.0 < self.mu_nominal < 1.0:
            raise ValueError(f"mu_nominal must lie in (0, 1), got {self.mu_nominal}")
        if self.mode == SURFACE_SPATIAL_FIELD:
            if self.mu_field is None:
                raise ValueError("spatial_field surface requires mu_field")
            grid = np.array(self.mu_field, dtype=float)
            if grid.ndim != 2 or min(grid.shape) < 2:
                raise ValueError(f"mu_field must be a 2D grid of at least 2x2 nodes, got shape {grid.shape}")
            if not (np.all(grid > 0.0) and np.all(grid < 1.0)):
                raise ValueError("All mu_field values must lie in (0, 1)")
            if not self.field_spacing > 0:
                raise ValueError(f"field_spacing must be positive, got {self.field_spacing}")
            grid.setflags(write=False)
            object.__setattr__(self, 'mu_field', grid)

    def mu_at(self, xy):
        """
        Friction coefficient at the given positions.

        Args:
            xy: array of shape (..., 2) in meters

        Returns:
            np.ndarray of shape (...)
        """
        xy = np.asarray(xy, dtype=float)
        if self.mode == SURFACE_UNIFORM:
            return np.full(xy.shape[:-1], self.mu_nominal)

        grid = self.mu_field
        nx, ny = grid.shape
        gx = np.clip((xy[..., 0] - self.field_origin[0]) / self.field_spacing, 0.0, nx - 1.0)
        gy = np.clip((xy[..., 1] - self.field_origin[1]) / self.field_spacing, 0.0, ny - 1.0)
        ix = np.minimum(np.floor(gx).astype(int), nx - 2)
        iy = np.minimum(np.floor(gy).astype(int), ny - 2)
        fx = gx - ix
        fy = gy - iy
        return ((1 - fx) * (1 - fy) * grid[ix, iy] + fx * (1 - fy) * grid[ix + 1, iy]
                + (1 - fx) * fy * grid[ix, iy + 1] + fx * fy * grid[ix + 1, iy + 1])

    def to_dict(self):
        data = {
            'mode': self.mode,
            'mu_nominal': self.mu_nominal,
            'gravity': self.gravity,
        }
        if self.mode == SURFACE_SPATIAL_FIELD:
            data.update({
                'mu_field': self.mu_field.tolist(),
                'field_origin': list(self.field_origin),
                'field_spacing': self.field_spacing,
            })
        return data

    @classmethod
    def from_dict(cls, data):
        field_grid = data.get('mu_field')
        return cls(
            mode=data.get('mode', SURFACE_UNIFORM),
            mu_nominal=data.get('mu_nominal', 0.15),
            mu_field=None if field_grid is None else np.array(field_grid, dtype=float),
            field_origin=tuple(data.get('field_origin', (0.0, 0.0))),
            field_spacing=data.get('field_spacing', 0.01),
            gravity=data.get('gravity', GRAVITY),
        )


@dataclass(frozen=True, eq=False)
class WorldState:
    """Disks (list order is the canonical object index), pusher and surface."""
    disks: Tuple[DiskState, ...]
    pusher: PusherState = field(default_factory=PusherState)
    surface: SurfaceModel = field(default_factory=SurfaceModel)

    def __post_init__(self):
        object.__setattr__(self, 'disks', tuple(self.disks))

    @property
    def n_disks(self):
        return len(self.disks)

    def with_pusher(self, **changes):
        return replace(self, pusher=replace(self.pusher, **changes))

    def with_surface(self, surface):
        return replace(self, surface=surface)

    def disk_positions(self):
        return np.array([[d.pose.x, d.pose.y] for d in self.disks]).reshape(-1, 2)

    def min_gap(self):
        """Smallest (center distance - sum of radii) over disk pairs; inf for one disk."""
        gaps = [math.inf]
        for i in range(self.n_disks):
            for j in range(i + 1, self.n_disks):
                a, b = self.disks[i], self.disks[j]
                distance = math.hypot(a.pose.x - b.pose.x, a.pose.y - b.pose.y)
                gaps.append(distance - a.radius - b.radius)
        return min(gaps)


@dataclass(frozen=True)
class SimConfig:
    dt: float = DEFAULT_DT
    restitution: float = 0.0
    contact_mu: float = 0.3
    penetration_tolerance: float = 1e-4
    baumgarte_beta: float = 0.2
    solver_iterations: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"SimConfig.dt must be positive, got {self.dt}")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError(f"SimConfig.restitution must lie in [0, 1], got {self.restitution}")
        if self.contact_mu < 0:
            raise ValueError(f"SimConfig.contact_mu must be non-negative, got {self.contact_mu}")
        if self.penetration_tolerance < 0:
            raise ValueError(f"SimConfig.penetration_tolerance must be non-negative, got {self.penetration_tolerance}")
        if int(self.solver_iterations) < 1:
            raise ValueError(f"SimConfig.solver_iterations must be >= 1, got {self.solver_iterations}")

    @classmethod
    def from_dict(cls, data):
        known = {k: v for k, v in (data or {}).items() if k in cls.__dataclass_fields__}
        unknown = set(data or {}) - set(known)
        if unknown:
            raise ValueError(f"Unknown SimConfig fields: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}
