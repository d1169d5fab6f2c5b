"""
Evaluation Pipelines
====================
Forward prediction of recorded test pushes at a fixed horizon, and
closed-loop control success on sampled easy and hard goals, in the
matched simulator or the surrogate real world.

Work fans out per trajectory or per episode; results are gathered in
index order so thread count never changes a report.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np
import pandas as pd

from cli_harness.exceptions import HorizonTooLong
from cli_harness.utils.metrics import compute_metrics
from dynamics_models.utils.checkpoints import load_model
from dynamics_models.utils.nominal import NominalEngine
from dynamics_models.utils.rollout import PHYSICS, LearnedModel, PhysicsModel
from planner.utils.episode import EpisodeOutcome, run_episode
from planner.utils.goals import EASY, HARD, control_world, sample_goal, swap_disks
from planner.utils.search import PlannerConfig
from scenario.utils.generation import field_rng, surface_shift, trajectory_rng
from scenario.utils.specs import MATCHED, SURROGATE, WORLDS, SurrogateRealSpec
from scenario.utils.surfaces import random_mu_field
from sim_core.exceptions import ContractViolation
from sim_core.utils.state import SimConfig, WorldState

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 200
CONTROL_COLUMNS = ['model', 'world', 'variant', 'difficulty', 'episodes', 'successes', 'success_pct']


def model_name(model):
    return getattr(model, 'kind', None) or type(model).__name__


def eval_prediction(model, dataset, horizon=DEFAULT_HORIZON, threads=1, name=None, dataset_name=''):
    """
    Roll ``model`` from each recorded start state along the recorded pusher
    track and score the poses ``horizon`` steps later.

    Raises:
        HorizonTooLong: some trajectory has fewer than ``horizon`` steps
    """
    if horizon < 1:
        raise ContractViolation(f"Evaluation horizon must be positive, got {horizon}")
    if len(dataset) == 0:
        raise ContractViolation("Cannot evaluate on an empty dataset")
    shortest = min(r.trajectory.n_steps for r in dataset.records)
    if horizon > shortest:
        raise HorizonTooLong(horizon, shortest)

    def predict(record):
        trajectory = record.trajectory
        path = trajectory.pusher_pos[:horizon + 1, None]
        predicted = model.predict(trajectory.batch_at(0), path)
        return predicted['pose'][horizon, 0]

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        predictions = list(pool.map(predict, dataset.records))

    name = name or model_name(model)
    report = compute_metrics(
        np.stack(predictions),
        np.stack([r.trajectory.pose[horizon] for r in dataset.records]),
        np.stack([r.trajectory.pose[0] for r in dataset.records]),
        model=name, horizon=horizon, dataset=dataset_name,
    )
    summary = ', '.join(f"object {m.object}: {m.pos_mm:.3f} mm / {m.rot_deg:.2f} deg" for m in report.objects)
    logger.info(f"{name} at horizon {horizon} over {len(dataset)} trajectories: {summary}")
    return report


@dataclass
class EpisodeRecord:
    index: int
    difficulty: str
    initial: WorldState
    outcome: EpisodeOutcome

    def to_dict(self):
        return {'index': self.index, 'difficulty': self.difficulty, **self.outcome.to_dict()}


@dataclass
class ControlReport:
    model: str
    world: str
    variant: str
    episodes: List[EpisodeRecord] = field(default_factory=list)

    def success_rate(self, difficulty):
        chosen = [e for e in self.episodes if e.difficulty == difficulty]
        if not chosen:
            return float('nan')
        return 100.0 * sum(e.outcome.success for e in chosen) / len(chosen)

    def to_frame(self):
        rows = []
        for difficulty in (EASY, HARD):
            chosen = [e for e in self.episodes if e.difficulty == difficulty]
            if chosen:
                successes = sum(e.outcome.success for e in chosen)
                rows.append([self.model, self.world, self.variant, difficulty, len(chosen), successes,
                             100.0 * successes / len(chosen)])
        return pd.DataFrame(rows, columns=CONTROL_COLUMNS)

    def to_dict(self):
        return {
            'model': self.model,
            'world': self.world,
            'variant': self.variant,
            'summary': self.to_frame().to_dict(orient='records'),
            'episodes': [e.to_dict() for e in self.episodes],
        }


@dataclass(frozen=True)
class ControlWorld:
    """The true world episodes are executed in, plus its sensor noise."""
    initial: WorldState
    sim: SimConfig
    sigma_pos: float = 0.0
    sigma_rot: float = 0.0


def control_setup(control, sim: SimConfig, world=MATCHED, surrogate: SurrogateRealSpec = None, seed=0,
                  swap=False, shifted=False, pusher_radius=None):
    """
    Two touching control disks on the chosen world.

    The surrogate world draws one friction field from ``seed`` (or the
    spec's field seed), stiffens contact friction and adds observation
    noise; ``shifted`` moves to a second field with a higher mean.
    """
    if world not in WORLDS:
        raise ContractViolation(f"Unknown world '{world}'. Allowed: {WORLDS}")
    if shifted and world != SURROGATE:
        raise ContractViolation("The surface-shift variant needs the surrogate world")

    kwargs = {'masses': tuple(control['masses']), 'radii': tuple(control['radii'])}
    if pusher_radius is not None:
        kwargs['pusher_radius'] = pusher_radius
    if world == MATCHED:
        initial = control_world(mu=control['mu'], **kwargs)
        setup = ControlWorld(initial=initial, sim=sim)
    else:
        spec = surrogate or SurrogateRealSpec()
        if shifted:
            spec = surface_shift(spec, seed=seed)
        field_seed = seed if spec.field_seed is None else spec.field_seed
        surface = random_mu_field(spec, field_rng(field_seed))
        initial = control_world(mu=spec.mu_mean, surface=surface, **kwargs)
        setup = ControlWorld(
            initial=initial,
            sim=replace(sim, contact_mu=sim.contact_mu * spec.contact_mu_scale),
            sigma_pos=spec.sigma_pos, sigma_rot=spec.sigma_rot,
        )
    if swap:
        setup = replace(setup, initial=swap_disks(setup.initial))
    return setup


def eval_control(model, setup: ControlWorld, cfg: PlannerConfig, n_easy=25, n_hard=25, seed=0, threads=1,
                 name=None, world=MATCHED, variant=''):
    """
    Run one episode per goal: ``n_easy`` easy goals, then ``n_hard`` hard
    ones. Episode i samples its goal and sensor noise from stream (seed, i).
    """
    if n_easy < 0 or n_hard < 0:
        raise ContractViolation(f"Episode counts must be non-negative, got {n_easy}, {n_hard}")
    difficulties = [EASY] * n_easy + [HARD] * n_hard

    def episode(index):
        rng = trajectory_rng(seed, index)
        goal = sample_goal(setup.initial, difficulties[index], rng)
        outcome = run_episode(
            setup.initial, model, goal, cfg, setup.sim,
            sigma_pos=setup.sigma_pos, sigma_rot=setup.sigma_rot, rng=rng,
        )
        return EpisodeRecord(index=index, difficulty=difficulties[index], initial=setup.initial, outcome=outcome)

    name = name or model_name(model)
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        episodes = list(pool.map(episode, range(len(difficulties))))

    report = ControlReport(model=name, world=world, variant=variant, episodes=episodes)
    logger.info(
        f"{name} control in the {world} world{f' ({variant})' if variant else ''}: "
        f"easy {report.success_rate(EASY):.0f}%, hard {report.success_rate(HARD):.0f}%",
    )
    return report


def checkpoint_label(params):
    return f"{params.kind}-finetuned" if params.metadata.get('fine_tuned') else params.kind


def nominal_for(params, fallback: NominalEngine):
    """The nominal engine a checkpoint was trained against, else ``fallback``."""
    stored = params.metadata.get('nominal')
    if not stored:
        return fallback
    return NominalEngine.from_dict(stored, sim=SimConfig.from_dict(stored.get('sim', {})))


def load_forward_model(path, nominal: NominalEngine):
    """
    A forward model from a checkpoint file, or the physics-only baseline for
    the reference 'physics'.

    Returns:
        (ForwardModel, label, checkpoint metadata or None)
    """
    if str(path) == PHYSICS:
        return PhysicsModel(nominal=nominal), PHYSICS, None
    params = load_model(path)
    return LearnedModel(params, nominal_for(params, nominal)), checkpoint_label(params), params.metadata
