"""
Scenario configuration objects. Each mirrors a section of
``settings.PUSHLAB`` and validates itself on construction.
"""

import math
from dataclasses import dataclass, fields
from typing import Optional, Tuple

from sim_core.constants import DIRECT_FORCE_PUSHER_MASS, PUSHER_RADIUS

DIRECT_FORCE = 'DirectForce'
POSITION_CONTROL = 'PositionControl'
SETUPS = [DIRECT_FORCE, POSITION_CONTROL]

MATCHED = 'matched'
SURROGATE = 'surrogate'
WORLDS = [MATCHED, SURROGATE]

# Bounds the surrogate friction field is clipped into
MU_FIELD_BOUNDS = (0.05, 0.25)


def _range(name, value, lower=-math.inf, upper=math.inf):
    low, high = float(value[0]), float(value[1])
    if not lower <= low <= high <= upper:
        raise ValueError(f"{name} must be an ordered range within [{lower}, {upper}], got {value}")
    return (low, high)


def _from_dict(cls, data):
    data = dict(data or {})
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"Unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**data)


def _to_dict(obj):
    out = {}
    for f in fields(obj):
        value = getattr(obj, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


@dataclass(frozen=True)
class SceneSpec:
    n_disks: int = 2
    mu_range: Tuple[float, float] = (0.05, 0.25)
    mass_range: Tuple[float, float] = (0.85, 1.15)
    radius_range: Tuple[float, float] = (0.05, 0.06)
    placement_range: Tuple[float, float] = (-math.pi / 3, math.pi / 3)
    max_tries: int = 100

    def __post_init__(self):
        if self.n_disks not in (2, 3):
            raise ValueError(f"SceneSpec.n_disks must be 2 or 3, got {self.n_disks}")
        object.__setattr__(self, 'mu_range', _range('SceneSpec.mu_range', self.mu_range, 0.0, 1.0))
        object.__setattr__(self, 'mass_range', _range('SceneSpec.mass_range', self.mass_range, 1e-9))
        object.__setattr__(self, 'radius_range', _range('SceneSpec.radius_range', self.radius_range, 1e-9))
        object.__setattr__(self, 'placement_range',
                           _range('SceneSpec.placement_range', self.placement_range, -math.pi, math.pi))
        if self.mu_range[0] <= 0.0 or self.mu_range[1] >= 1.0:
            raise ValueError(f"SceneSpec.mu_range must lie inside (0, 1), got {self.mu_range}")
        if self.max_tries < 1:
            raise ValueError(f"SceneSpec.max_tries must be positive, got {self.max_tries}")

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data)

    def to_dict(self):
        return _to_dict(self)


@dataclass(frozen=True)
class PushSpec:
    """
    One straight push. The pusher starts tangent to disk 1 at
    ``pusher_angle`` around it and moves along the pusher-to-center
    direction rotated by ``push_direction``.
    """
    setup: str = POSITION_CONTROL
    pusher_angle_range: Tuple[float, float] = (-math.pi / 3, math.pi / 3)
    push_direction_range: Tuple[float, float] = (-math.pi / 6, math.pi / 6)
    duration: float = 2.0
    distance: float = 0.010
    distance_tolerance: float = 0.2
    pusher_radius: float = PUSHER_RADIUS
    pusher_mass: float = DIRECT_FORCE_PUSHER_MASS
    max_force: float = 20.0

    def __post_init__(self):
        if self.setup not in SETUPS:
            raise ValueError(f"Unknown PushSpec.setup '{self.setup}'. Allowed: {SETUPS}")
        object.__setattr__(self, 'pusher_angle_range',
                           _range('PushSpec.pusher_angle_range', self.pusher_angle_range, -math.pi, math.pi))
        object.__setattr__(self, 'push_direction_range',
                           _range('PushSpec.push_direction_range', self.push_direction_range,
                                  -math.pi / 2, math.pi / 2))
        for name in ('duration', 'distance', 'pusher_radius', 'pusher_mass', 'max_force'):
            if not getattr(self, name) > 0:
                raise ValueError(f"PushSpec.{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.distance_tolerance < 1.0:
            raise ValueError(f"PushSpec.distance_tolerance must lie in (0, 1), got {self.distance_tolerance}")

    def n_steps(self, dt):
        return int(round(self.duration / dt))

    @property
    def speed(self):
        return self.distance / self.duration

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data)

    def to_dict(self):
        return _to_dict(self)


@dataclass(frozen=True)
class SurrogateRealSpec:
    """
    The surrogate real world: a smooth friction field, a stiffer contact
    coefficient, nominal disks and Gaussian observation noise.
    """
    mu_mean: float = 0.15
    mu_amplitude: float = 0.05
    correlation_length: float = 0.1
    contact_mu_scale: float = 1.3
    sigma_pos: float = 0.0005
    sigma_rot: float = 0.005
    field_extent: float = 0.8
    field_spacing: float = 0.01
    n_modes: int = 64
    field_seed: Optional[int] = None

    def __post_init__(self):
        low, high = MU_FIELD_BOUNDS
        if not low < self.mu_mean < high:
            raise ValueError(f"SurrogateRealSpec.mu_mean must lie in {MU_FIELD_BOUNDS}, got {self.mu_mean}")
        if self.mu_amplitude < 0:
            raise ValueError(f"SurrogateRealSpec.mu_amplitude must be non-negative, got {self.mu_amplitude}")
        for name in ('correlation_length', 'contact_mu_scale', 'field_extent', 'field_spacing'):
            if not getattr(self, name) > 0:
                raise ValueError(f"SurrogateRealSpec.{name} must be positive, got {getattr(self, name)}")
        if self.sigma_pos < 0 or self.sigma_rot < 0:
            raise ValueError("SurrogateRealSpec noise levels must be non-negative")
        if self.n_modes < 1:
            raise ValueError(f"SurrogateRealSpec.n_modes must be positive, got {self.n_modes}")

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data)

    def to_dict(self):
        return _to_dict(self)
