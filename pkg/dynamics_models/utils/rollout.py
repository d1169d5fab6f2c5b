"""
Recurrent Rollouts and Forward Models
=====================================
Multi-step prediction with IN/SAIN, backpropagation through time, and the
ForwardModel interface shared by the physics-only, IN and SAIN predictors.

For SAIN the nominal-engine trajectory is computed once, from the initial
state, and evolves from its own predictions; the network only sees its
per-step deltas. Gradients never flow into it.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from dynamics_models.utils.features import IN, SAIN, ObjectState
from dynamics_models.utils.interaction_network import ModelParams, model_step, model_step_backward, step_actions
from dynamics_models.utils.nominal import NominalEngine
from neural.utils.mlp import activation_pattern
from sim_core.exceptions import ContractViolation
from sim_core.utils.batch import WorldBatch
from sim_core.utils.engine import rollout_batch
from sim_core.utils.state import wrap_angle
from sim_core.utils.trajectory import Trajectory

logger = logging.getLogger(__name__)

PHYSICS = 'physics'


@dataclass
class ModelRollout:
    """Stacked predictions: pos (T+1, B, n, 2), theta (T+1, B, n) unwrapped, vel (T+1, B, n, 3)."""
    pos: np.ndarray
    theta: np.ndarray
    vel: np.ndarray
    mass: np.ndarray
    radius: np.ndarray
    tapes: Optional[List] = None
    actions: Optional[np.ndarray] = None

    @property
    def n_steps(self):
        return self.pos.shape[0] - 1

    def pose(self):
        return np.concatenate([self.pos, self.theta[..., None]], axis=-1)


def rollout_arrays(params: ModelParams, state0: ObjectState, pusher_path, pusher_radius,
                   engine_dvel=None, engine_dpose=None, keep_tapes=False):
    """
    Unroll a model from batched initial states along a pusher path.

    Args:
        params: IN or SAIN parameters
        state0: initial states (B, n)
        pusher_path: (T+1, B, 2) pusher positions
        pusher_radius: pusher cylinder radius
        engine_dvel, engine_dpose: SAIN only, (T, B, n, 3) and (T, B, n, 4)
        keep_tapes: keep every step's tape for rollout_backward

    Returns:
        ModelRollout
    """
    path = np.asarray(pusher_path, dtype=np.float64)
    steps = path.shape[0] - 1
    if path.ndim != 3 or path.shape[1:] != (state0.batch_size, 2):
        raise ContractViolation(f"Pusher path has shape {path.shape}, expected (T+1, {state0.batch_size}, 2)")
    if params.kind == SAIN and (engine_dvel is None or engine_dvel.shape[0] < steps):
        raise ContractViolation("SAIN rollout needs engine deltas for every step")

    pos, theta, vel = [state0.pos], [state0.theta], [state0.vel]
    tapes, actions = [], []
    state = state0
    for t in range(steps):
        action = step_actions(state, path[t], path[t + 1], pusher_radius, params.dt)
        if params.kind == SAIN:
            state, tape = model_step(params, state, action, engine_dvel[t], engine_dpose[t])
        else:
            state, tape = model_step(params, state, action)
        pos.append(state.pos)
        theta.append(state.theta)
        vel.append(state.vel)
        actions.append(action)
        if keep_tapes:
            tapes.append(tape)

    return ModelRollout(
        pos=np.stack(pos), theta=np.stack(theta), vel=np.stack(vel),
        mass=state0.mass, radius=state0.radius,
        tapes=tapes if keep_tapes else None,
        actions=np.stack(actions) if actions else np.zeros((0,) + state0.pos.shape),
    )


def rollout_backward(params: ModelParams, rollout: ModelRollout, g_pos, g_theta, g_vel):
    """
    Backpropagation through time.

    Args:
        g_pos, g_theta, g_vel: loss gradients w.r.t. every predicted state,
            shapes as the rollout arrays; entry 0 (the given initial state)
            is ignored

    Returns:
        dict: parameter gradient blocks summed over steps and batch
    """
    if rollout.tapes is None:
        raise ContractViolation("Rollout was recorded without tapes")
    grads = {name: np.zeros_like(value) for name, value in params.blocks().items()}
    carry_pos = np.zeros_like(rollout.pos[0])
    carry_theta = np.zeros_like(rollout.theta[0])
    carry_vel = np.zeros_like(rollout.vel[0])
    for t in range(rollout.n_steps - 1, -1, -1):
        step_grads, (carry_pos, carry_theta, carry_vel) = model_step_backward(
            params, rollout.tapes[t],
            g_pos[t + 1] + carry_pos, g_theta[t + 1] + carry_theta, g_vel[t + 1] + carry_vel,
        )
        for name, value in step_grads.items():
            grads[name] += value
    return grads


def pusher_path_from_plan(start, plan, dt):
    """Kinematic pusher positions (T+1, ..., 2) under a velocity plan (T, ..., 2)."""
    plan = np.asarray(plan, dtype=np.float64)
    path = [np.asarray(start, dtype=np.float64)]
    for command in plan:
        path.append(path[-1] + dt * command)
    return np.stack(path)


def rollout_model(params: ModelParams, s0, action_seq, T=None, nominal: Optional[NominalEngine] = None):
    """
    Predict a trajectory from a single WorldState under a pusher velocity plan.

    Args:
        params: IN or SAIN parameters
        s0 (WorldState): initial world, first entry of the result
        action_seq: (T, 2) kinematic pusher velocities
        T: number of steps (defaults to len(action_seq))
        nominal: engine providing SAIN's deltas (defaults to NominalEngine())

    Returns:
        Trajectory: T+1 predicted states; the pusher follows the plan
    """
    plan = np.asarray(action_seq, dtype=np.float64).reshape(-1, 2)
    steps = plan.shape[0] if T is None else int(T)
    if steps > plan.shape[0]:
        raise ContractViolation(f"Plan has {plan.shape[0]} steps, {steps} requested")
    plan = plan[:steps]

    batch = WorldBatch.from_world(s0)
    path = pusher_path_from_plan(batch.pusher_pos, plan[:, None, :], params.dt)
    predicted = LearnedModel(params, nominal or NominalEngine()).predict(batch, path)

    pose = predicted['pose'][:, 0]
    return Trajectory(
        dt=params.dt,
        pose=pose,
        twist=predicted['twist'][:, 0],
        mass=batch.mass[0].copy(),
        radius=batch.radius[0].copy(),
        pusher_pos=path[:, 0],
        pusher_vel=np.vstack([batch.pusher_vel, plan]),
        commands=plan,
        pusher_radius=batch.pusher_radius,
        pusher_mass=None,
        surface=s0.surface,
    )


class ForwardModel:
    """
    Common interface of the physics-only, IN and SAIN predictors.

    ``predict`` takes true initial states and a pusher path and returns
    stacked 'pose' and 'twist' arrays of shape (T+1, B, n, 3) with wrapped
    headings.
    """
    kind = None

    def predict(self, batch: WorldBatch, pusher_path):
        raise NotImplementedError

    def predict_final(self, batch: WorldBatch, pusher_path):
        predicted = self.predict(batch, pusher_path)
        return predicted['pose'][-1], predicted['twist'][-1]


class PhysicsModel(ForwardModel):
    """
    The analytical engine as a predictor.

    With ``nominal`` the statics and friction are replaced by the nominal
    estimates (the physics-only baseline); without it the batch's own
    parameters are used, which reproduces the generating engine exactly for
    a kinematic pusher.
    """
    kind = PHYSICS

    def __init__(self, nominal: Optional[NominalEngine] = None, sim=None):
        self.nominal = nominal
        self.sim = sim if sim is not None else (nominal.sim if nominal is not None else None)

    def predict(self, batch, pusher_path):
        if self.nominal is not None:
            rollout = self.nominal.replay(batch, pusher_path)
        else:
            path = np.asarray(pusher_path, dtype=float)
            start = batch.copy()
            start.pusher_pos = path[0].copy()
            start.pusher_mass = None
            rollout = rollout_batch(start, (path[1:] - path[:-1]) / self.sim.dt, self.sim)
        return {'pose': rollout['pose'], 'twist': rollout['twist']}


class LearnedModel(ForwardModel):

    def __init__(self, params: ModelParams, nominal: Optional[NominalEngine] = None):
        self.params = params
        self.nominal = nominal or NominalEngine()
        self.kind = params.kind

    def predict(self, batch, pusher_path):
        path = np.asarray(pusher_path, dtype=float)
        dvel = dpose = None
        if self.params.kind == SAIN:
            dvel, dpose = self.nominal.deltas(batch, path)
        rollout = rollout_arrays(
            self.params, ObjectState.from_batch(batch), path, batch.pusher_radius, dvel, dpose,
        )
        pose = rollout.pose()
        pose[..., 2] = wrap_angle(pose[..., 2])
        return {'pose': pose, 'twist': rollout.vel}


def forward_model_for(kind, params=None, nominal=None):
    if kind == PHYSICS:
        return PhysicsModel(nominal=nominal or NominalEngine())
    if kind in (IN, SAIN):
        if params is None or params.kind != kind:
            raise ContractViolation(f"A {kind} forward model needs {kind} parameters")
        return LearnedModel(params, nominal)
    raise ContractViolation(f"Unknown forward model kind '{kind}'")


def rollout_signature(rollout: ModelRollout):
    """
    ReLU activation patterns of every step plus which object each action
    went to. Two rollouts with the same signature lie on the same smooth
    piece of the loss.
    """
    if rollout.tapes is None:
        raise ContractViolation("Rollout was recorded without tapes")
    parts = [np.packbits(np.any(rollout.actions != 0.0, axis=-1)).tobytes()]
    for tape in rollout.tapes:
        parts.append(activation_pattern(tape.rel_tape))
        parts.append(activation_pattern(tape.dyn_tape))
    return b''.join(parts)
