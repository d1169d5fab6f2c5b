"""
Analytical Disk Engine
======================
Semi-implicit step for disks on a frictional surface pushed by a cylinder:

    1. pusher update (kinematic: velocity = command; dynamic: command is a force)
    2. ground friction on disk twists
    3. sequential-impulse contact solve
    4. integrate poses and pusher position by dt
    5. positional projection of residual overlap

The same code path serves single worlds (batch of one), rollouts and the
planner's batched candidate expansion. There is no module-level state, so
independent rollouts may run on separate threads.
"""

import logging

import numpy as np

from sim_core.exceptions import ContractViolation
from sim_core.utils.batch import WorldBatch
from sim_core.utils.contacts import ContactDiagnostics, project_overlaps, solve_contact_velocities
from sim_core.utils.friction import apply_ground_friction
from sim_core.utils.state import wrap_angle
from sim_core.utils.trajectory import Trajectory

logger = logging.getLogger(__name__)


def step_batch(batch: WorldBatch, commands, cfg, diagnostics=None):
    """
    Advance every batch element by one step.

    Args:
        batch: current states (not modified)
        commands: (B, 2) or (2,) pusher velocity (kinematic) or force (dynamic)
        cfg: SimConfig
        diagnostics: optional ContactDiagnostics to accumulate into

    Returns:
        tuple: (WorldBatch, ContactDiagnostics)
    """
    commands = np.broadcast_to(np.asarray(commands, dtype=float), (batch.batch_size, 2))
    diagnostics = diagnostics if diagnostics is not None else ContactDiagnostics()
    out = batch.copy()

    if out.pusher_mass is None:
        out.pusher_vel = commands.copy()
    else:
        out.pusher_vel = out.pusher_vel + cfg.dt * commands / out.pusher_mass

    mu = out.surface.mu_at(out.pose[..., :2])
    out.twist = apply_ground_friction(out.twist, out.radius, mu, out.surface.gravity, cfg.dt)

    solve_contact_velocities(out, cfg)

    out.pose = out.pose + cfg.dt * out.twist
    out.pose[..., 2] = wrap_angle(out.pose[..., 2])
    out.pusher_pos = out.pusher_pos + cfg.dt * out.pusher_vel

    project_overlaps(out, cfg, diagnostics)
    return out, diagnostics


def step(world, pusher_cmd, cfg):
    """Advance a single WorldState by one step."""
    batch, _ = step_batch(WorldBatch.from_world(world), pusher_cmd, cfg)
    return batch.world(0)


def rollout_batch(batch: WorldBatch, commands, cfg, record=True):
    """
    Roll a batch forward under a command schedule.

    Args:
        batch: initial states
        commands: (T, B, 2), or (T, 2) shared by all elements
        cfg: SimConfig
        record: keep every intermediate state

    Returns:
        dict with 'final' (WorldBatch), 'diagnostics' and, when recording,
        'pose'/'twist' of shape (T+1, B, n, 3) and 'pusher_pos'/'pusher_vel'
        of shape (T+1, B, 2)
    """
    commands = np.asarray(commands, dtype=float)
    if commands.ndim == 2:
        commands = np.broadcast_to(commands[:, None, :], (commands.shape[0], batch.batch_size, 2))
    if commands.ndim != 3 or commands.shape[1:] != (batch.batch_size, 2):
        raise ContractViolation(f"Command schedule has shape {commands.shape}, expected (T, {batch.batch_size}, 2)")

    diagnostics = ContactDiagnostics()
    history = {'pose': [batch.pose], 'twist': [batch.twist],
               'pusher_pos': [batch.pusher_pos], 'pusher_vel': [batch.pusher_vel]}
    current = batch
    for k in range(commands.shape[0]):
        current, _ = step_batch(current, commands[k], cfg, diagnostics)
        if record:
            for key in history:
                history[key].append(getattr(current, key))

    if diagnostics.deep_penetrations:
        logger.debug(f"Rollout of {commands.shape[0]} steps: {diagnostics.to_dict()}")

    result = {'final': current, 'diagnostics': diagnostics}
    if record:
        result.update({key: np.stack(values) for key, values in history.items()})
    return result


def trajectories_from_rollout(batch, rollout, commands, cfg):
    """Split a recorded batched rollout into one Trajectory per element."""
    commands = np.asarray(commands, dtype=float)
    if commands.ndim == 2:
        commands = np.broadcast_to(commands[:, None, :], (commands.shape[0], batch.batch_size, 2))
    return [
        Trajectory(
            dt=cfg.dt,
            pose=rollout['pose'][:, b].copy(),
            twist=rollout['twist'][:, b].copy(),
            mass=batch.mass[b].copy(),
            radius=batch.radius[b].copy(),
            pusher_pos=rollout['pusher_pos'][:, b].copy(),
            pusher_vel=rollout['pusher_vel'][:, b].copy(),
            commands=np.array(commands[:, b]),
            pusher_radius=batch.pusher_radius,
            pusher_mass=batch.pusher_mass,
            surface=batch.surface,
            diagnostics=rollout['diagnostics'] if batch.batch_size == 1 else ContactDiagnostics(),
        )
        for b in range(batch.batch_size)
    ]


def rollout_physics(world, pusher_plan, cfg):
    """
    Simulate a pusher plan from a world.

    Args:
        world (WorldState): initial state, first entry of the result
        pusher_plan: sequence of (2,) commands, one per step
        cfg (SimConfig): engine configuration

    Returns:
        Trajectory: len(pusher_plan) + 1 states
    """
    plan = np.asarray(pusher_plan, dtype=float).reshape(-1, 2)
    if plan.shape[0] < 1:
        raise ContractViolation("rollout_physics needs a plan of at least one step")
    batch = WorldBatch.from_world(world)
    rollout = rollout_batch(batch, plan, cfg)
    return trajectories_from_rollout(batch, rollout, plan, cfg)[0]
