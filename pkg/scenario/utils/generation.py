"""
Dataset Generation
==================
Straight pushes in either setup, in the matched simulator or in the
surrogate real world, with nominal-engine shadow rollouts attached for
SAIN training.

Every trajectory draws from its own stream seeded by (dataset seed,
index), so serial and threaded generation agree bit for bit.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Optional

import numpy as np

from dynamics_models.utils.nominal import NominalEngine
from scenario.exceptions import SceneSamplingError
from scenario.utils.noise import apply_observation_noise
from scenario.utils.records import Dataset, ShadowWindow, TrajectoryRecord
from scenario.utils.sampling import build_scene, push_heading, sample_scene_params
from scenario.utils.specs import (
    DIRECT_FORCE,
    MATCHED,
    POSITION_CONTROL,
    SURROGATE,
    PushSpec,
    SceneSpec,
    SurrogateRealSpec,
)
from scenario.utils.surfaces import random_mu_field
from sim_core.exceptions import ContractViolation
from sim_core.utils.batch import WorldBatch
from sim_core.utils.engine import rollout_batch, rollout_physics
from sim_core.utils.state import SimConfig

logger = logging.getLogger(__name__)

# spawn key of the per-dataset friction field stream, above any trajectory index
FIELD_STREAM = 2 ** 32
# candidate forces evaluated per bracketing round
FORCE_CANDIDATES = 8
FORCE_ROUNDS = 8


def trajectory_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def field_rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(FIELD_STREAM,)))


def _travel(world, direction, forces, steps, sim):
    """Net pusher displacement after a constant force push, one entry per candidate force."""
    batch = WorldBatch.from_world(world, batch_size=len(forces))
    commands = np.broadcast_to(forces[None, :, None] * direction, (steps, len(forces), 2))
    final = rollout_batch(batch, commands, sim, record=False)['final']
    return np.linalg.norm(final.pusher_pos - batch.pusher_pos, axis=-1)


def calibrate_force(world, direction, push: PushSpec, sim: SimConfig, index=0):
    """
    Constant force magnitude under which the dynamic pusher travels
    ``push.distance`` in ``push.duration``.

    Each round simulates a batch of candidates spread over the current
    bracket and keeps the sub-interval where the travel crosses the target.

    Raises:
        SceneSamplingError: no force within max_force reaches the tolerance
    """
    steps = push.n_steps(sim.dt)
    target = push.distance
    low, high = 0.0, push.max_force
    best_force, best_error = None, math.inf

    for _ in range(FORCE_ROUNDS):
        forces = np.linspace(low, high, FORCE_CANDIDATES + 2)[1:-1]
        travel = _travel(world, direction, forces, steps, sim)
        errors = np.abs(travel - target)
        k = int(np.argmin(errors))
        if errors[k] < best_error:
            best_force, best_error = float(forces[k]), float(errors[k])
        if best_error <= 0.01 * target:
            break
        above = np.nonzero(travel >= target)[0]
        first = int(above[0]) if above.size else FORCE_CANDIDATES
        low = float(forces[first - 1]) if first > 0 else low
        high = float(forces[first]) if first < FORCE_CANDIDATES else high

    if best_error > push.distance_tolerance * target:
        raise SceneSamplingError(
            index, f"force calibration missed {target * 1e3:.1f} mm travel by {best_error * 1e3:.2f} mm",
        )
    return best_force


def shadow_windows(trajectory, nominal: NominalEngine, window):
    """Nominal-engine rollouts restarted from the observed state at every full window start."""
    shadows = []
    for start in range(0, trajectory.n_steps - window + 1, window):
        rollout = nominal.replay(trajectory.batch_at(start), trajectory.pusher_pos[start:start + window + 1, None])
        shadows.append(ShadowWindow(start=start, pose=rollout['pose'][:, 0], twist=rollout['twist'][:, 0]))
    return shadows


def generate_trajectory(index, seed, setup, scene: SceneSpec, push: PushSpec, sim: SimConfig,
                        nominal: NominalEngine, surrogate: Optional[SurrogateRealSpec] = None,
                        surface=None, shadow_window=200, sigma_pos=0.0, sigma_rot=0.0):
    """
    One recorded push.

    In the surrogate world the disks are the nominal ones, friction comes
    from ``surface`` and the contact coefficient is scaled; observation noise
    then uses the surrogate's levels.
    """
    rng = trajectory_rng(seed, index)
    params = sample_scene_params(scene, push, rng, index)
    true_sim = sim
    if surrogate is not None:
        params['masses'] = nominal.per_object(nominal.masses, scene.n_disks).tolist()
        params['radii'] = nominal.per_object(nominal.radii, scene.n_disks).tolist()
        params['mu'] = surrogate.mu_mean
        true_sim = replace(sim, contact_mu=sim.contact_mu * surrogate.contact_mu_scale)
        sigma_pos, sigma_rot = surrogate.sigma_pos, surrogate.sigma_rot

    heading = push_heading(params)
    direction = np.array([math.cos(heading), math.sin(heading)])
    steps = push.n_steps(sim.dt)

    if setup == POSITION_CONTROL:
        world = build_scene(params, push, surface)
        plan = np.tile(push.speed * direction, (steps, 1))
    elif setup == DIRECT_FORCE:
        world = build_scene(params, push, surface, dynamic_pusher=True)
        force = calibrate_force(world, direction, push, true_sim, index)
        params['force'] = force
        plan = np.tile(force * direction, (steps, 1))
    else:
        raise ContractViolation(f"Unknown setup '{setup}'")

    trajectory = rollout_physics(world, plan, true_sim)
    trajectory = apply_observation_noise(trajectory, sigma_pos, sigma_rot, rng)
    params.update({'index': index, 'setup': setup})
    return TrajectoryRecord(
        index=index,
        trajectory=trajectory,
        shadows=shadow_windows(trajectory, nominal, shadow_window) if shadow_window else [],
        params=params,
    )


def generate_dataset(n, setup, scene: Optional[SceneSpec] = None, seed=0, push: Optional[PushSpec] = None,
                     sim: Optional[SimConfig] = None, nominal: Optional[NominalEngine] = None,
                     surrogate: Optional[SurrogateRealSpec] = None, shadow_window=200,
                     sigma_pos=0.0, sigma_rot=0.0, threads=1):
    """
    Generate ``n`` straight pushes.

    Args:
        n: number of trajectories (>= 1)
        setup: 'DirectForce' or 'PositionControl'
        scene: parameter distributions and object count
        seed: dataset seed
        push: push geometry and duration; its setup field is overridden by ``setup``
        sim: engine configuration of the true world
        nominal: engine used for the shadow rollouts
        surrogate: generate in the surrogate real world instead of the matched simulator
        shadow_window: steps per shadow rollout (0 disables them)
        sigma_pos, sigma_rot: observation noise in the matched world
        threads: worker threads; results do not depend on it

    Returns:
        Dataset

    Raises:
        SceneSamplingError: carries the index of the failing trajectory
    """
    if n < 1:
        raise ContractViolation(f"Dataset size must be at least 1, got {n}")
    scene = scene or SceneSpec()
    push = replace(push or PushSpec(), setup=setup)
    sim = sim or SimConfig()
    nominal = nominal or NominalEngine(sim=sim)

    surface = None
    if surrogate is not None:
        field_seed = seed if surrogate.field_seed is None else surrogate.field_seed
        surface = random_mu_field(surrogate, field_rng(field_seed))

    def generate(index):
        return generate_trajectory(
            index, seed, setup, scene, push, sim, nominal, surrogate, surface,
            shadow_window, sigma_pos, sigma_rot,
        )

    world = SURROGATE if surrogate is not None else MATCHED
    logger.info(f"Generating {n} {setup} trajectories with {scene.n_disks} disks ({world} world, seed {seed})")
    records = []
    step = max(1, n // 10)
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        for record in pool.map(generate, range(n)):
            records.append(record)
            if len(records) % step == 0 or len(records) == n:
                logger.info(f"Generated {len(records)}/{n} trajectories")

    metadata = {
        'dt': sim.dt,
        'setup': setup,
        'seed': seed,
        'n_disks': scene.n_disks,
        'world': world,
        'scene': scene.to_dict(),
        'push': push.to_dict(),
        'sim': sim.to_dict(),
        'nominal': nominal.to_dict(),
        'surrogate': surrogate.to_dict() if surrogate is not None else None,
        'shadow_window': shadow_window,
        'noise': {'sigma_pos': sigma_pos, 'sigma_rot': sigma_rot} if surrogate is None else
                 {'sigma_pos': surrogate.sigma_pos, 'sigma_rot': surrogate.sigma_rot},
    }
    return Dataset(metadata=metadata, records=records)


def surface_shift(spec: SurrogateRealSpec, mu_mean=0.2, field_seed=None, seed=0):
    """Surrogate variant on a different surface: new field draw, higher mean friction."""
    return replace(spec, mu_mean=mu_mean, field_seed=field_seed if field_seed is not None else seed + 1)
