"""
Feature Encoding
================
Object states inside model rollouts and the fixed input layouts of the two
networks. Rotations enter every network as sin/cos; inside a rollout the
heading is kept unwrapped and only wrapped when a WorldState is built.

Relation input, one row per ordered pair (receiver i, sender j), i-major:

    [v_i (3), p_i - p_j (2), sin(th_i - th_j), cos(th_i - th_j),
     v_i - v_j (3), m_i, m_j, r_i, r_j]                          IN   = 14
    + engine velocity delta of i (3)                             SAIN = 17

Dynamics input, one row per object:

    [v_i (3), action_i (2), m_i, r_i, effect_i (16)]              IN   = 23
    + engine pose delta of i (dx, dy, sin dth, cos dth)           SAIN = 27
"""

from dataclasses import dataclass

import numpy as np

from neural.utils.standardizer import Standardizer
from sim_core.exceptions import ContractViolation
from sim_core.utils.batch import WorldBatch
from sim_core.utils.state import wrap_angle

IN = 'IN'
SAIN = 'SAIN'
MODEL_KINDS = [IN, SAIN]

EFFECT_WIDTH = 16
HIDDEN_SIZES = (128, 64, 32, 16)
DYN_OUT_WIDTH = 3

REL_WIDTHS = {IN: 14, SAIN: 17}
DYN_WIDTHS = {IN: 23, SAIN: 27}

# column slices
REL_VEL = slice(0, 3)
REL_DPOS = slice(3, 5)
REL_SIN = 5
REL_COS = 6
REL_DVEL = slice(7, 10)
DYN_VEL = slice(0, 3)
DYN_ACTION = slice(3, 5)
DYN_EFFECT = slice(7, 7 + EFFECT_WIDTH)

# pusher-to-rim slack when deciding which disk an action is applied to
ACTION_CONTACT_MARGIN = 1e-3


def check_kind(kind):
    if kind not in MODEL_KINDS:
        raise ContractViolation(f"Unknown model kind '{kind}'. Allowed: {MODEL_KINDS}")
    return kind


@dataclass(frozen=True, eq=False)
class FeatureCodec:
    """Standardizers for both network inputs and the f_dyn output."""
    kind: str
    rel_in: Standardizer
    dyn_in: Standardizer
    dyn_out: Standardizer

    def __post_init__(self):
        check_kind(self.kind)
        widths = {
            'rel_in': REL_WIDTHS[self.kind],
            'dyn_in': DYN_WIDTHS[self.kind],
            'dyn_out': DYN_OUT_WIDTH,
        }
        for name, width in widths.items():
            if getattr(self, name).width != width:
                raise ContractViolation(
                    f"{self.kind} codec '{name}' has width {getattr(self, name).width}, expected {width}"
                )
        if np.any(self.dyn_out.mean != 0.0):
            raise ContractViolation("f_dyn output standardizer must be scale-only")

    @classmethod
    def identity(cls, kind):
        check_kind(kind)
        return cls(
            kind=kind,
            rel_in=Standardizer.identity(REL_WIDTHS[kind]),
            dyn_in=Standardizer.identity(DYN_WIDTHS[kind]),
            dyn_out=Standardizer.identity(DYN_OUT_WIDTH),
        )

    def to_dict(self):
        return {
            'kind': self.kind,
            'rel_in': self.rel_in.to_dict(),
            'dyn_in': self.dyn_in.to_dict(),
            'dyn_out': self.dyn_out.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            kind=data['kind'],
            rel_in=Standardizer.from_dict(data['rel_in']),
            dyn_in=Standardizer.from_dict(data['dyn_in']),
            dyn_out=Standardizer.from_dict(data['dyn_out']),
        )


@dataclass
class ObjectState:
    """Batched object states: pos (B, n, 2), theta (B, n), vel (B, n, 3), mass and radius (B, n)."""
    pos: np.ndarray
    theta: np.ndarray
    vel: np.ndarray
    mass: np.ndarray
    radius: np.ndarray

    @property
    def batch_size(self):
        return self.mass.shape[0]

    @property
    def n_objects(self):
        return self.mass.shape[1]

    @classmethod
    def from_arrays(cls, pose, twist, mass, radius):
        pose = np.asarray(pose, dtype=np.float64)
        return cls(
            pos=pose[..., :2].copy(),
            theta=pose[..., 2].copy(),
            vel=np.array(twist, dtype=np.float64),
            mass=np.array(mass, dtype=np.float64),
            radius=np.array(radius, dtype=np.float64),
        )

    @classmethod
    def from_batch(cls, batch: WorldBatch):
        return cls.from_arrays(batch.pose, batch.twist, batch.mass, batch.radius)

    def pose(self):
        return np.concatenate([self.pos, self.theta[..., None]], axis=-1)

    def to_batch(self, template: WorldBatch):
        """Copy into a WorldBatch with the template's pusher and surface; headings are wrapped."""
        out = template.copy()
        out.pose = self.pose()
        out.pose[..., 2] = wrap_angle(out.pose[..., 2])
        out.twist = self.vel.copy()
        out.mass = self.mass.copy()
        out.radius = self.radius.copy()
        return out


def pair_indices(n):
    """Receiver and sender index of every ordered pair, receiver-major."""
    receivers = [i for i in range(n) for j in range(n) if j != i]
    senders = [j for i in range(n) for j in range(n) if j != i]
    return np.array(receivers, dtype=int), np.array(senders, dtype=int)


def relation_features(state: ObjectState, receivers, senders, engine_dvel=None):
    """Raw relation rows, shape (B, n(n-1), 14) or 17 with engine deltas."""
    dth = state.theta[:, receivers] - state.theta[:, senders]
    columns = [
        state.vel[:, receivers],
        state.pos[:, receivers] - state.pos[:, senders],
        np.sin(dth)[..., None],
        np.cos(dth)[..., None],
        state.vel[:, receivers] - state.vel[:, senders],
        state.mass[:, receivers, None],
        state.mass[:, senders, None],
        state.radius[:, receivers, None],
        state.radius[:, senders, None],
    ]
    if engine_dvel is not None:
        columns.append(engine_dvel[:, receivers])
    return np.concatenate(columns, axis=-1)


def dynamics_features(state: ObjectState, actions, effects, engine_dpose=None):
    """Raw dynamics rows, shape (B, n, 23) or 27 with engine deltas."""
    columns = [state.vel, actions, state.mass[..., None], state.radius[..., None], effects]
    if engine_dpose is not None:
        columns.append(engine_dpose)
    return np.concatenate(columns, axis=-1)


def engine_deltas(pose, twist):
    """
    Per-step engine deltas from a nominal-engine rollout.

    Args:
        pose, twist: (T+1, B, n, 3)

    Returns:
        tuple: (dvel (T, B, n, 3), dpose (T, B, n, 4) as dx, dy, sin dth, cos dth)
    """
    dvel = twist[1:] - twist[:-1]
    dth = pose[1:, ..., 2] - pose[:-1, ..., 2]
    dpose = np.concatenate(
        [pose[1:, ..., :2] - pose[:-1, ..., :2], np.sin(dth)[..., None], np.cos(dth)[..., None]],
        axis=-1,
    )
    return dvel, dpose


def encode_actions(pos, radius, pusher_from, pusher_to, pusher_radius, dt, margin=ACTION_CONTACT_MARGIN):
    """
    Per-object action for one step.

    The pusher's displacement over the step divided by dt goes to the
    nearest disk whose center lies within r_i + r_pusher + margin of the
    pusher's end-of-step position; every other object gets zeros.

    Args:
        pos: (B, n, 2) disk positions at the start of the step
        radius: (B, n)
        pusher_from, pusher_to: (B, 2) pusher positions at both ends of the step

    Returns:
        np.ndarray: (B, n, 2)
    """
    velocity = (pusher_to - pusher_from) / dt
    distance = np.linalg.norm(pos - pusher_to[:, None, :], axis=-1)
    within = distance <= radius + pusher_radius + margin
    nearest = np.argmin(np.where(within, distance, np.inf), axis=1)
    touched = within.any(axis=1)

    actions = np.zeros(pos.shape[:2] + (2,))
    rows = np.nonzero(touched)[0]
    actions[rows, nearest[rows]] = velocity[rows]
    return actions
