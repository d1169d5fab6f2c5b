"""
Training and Fine-Tuning
========================
Backpropagation through time over fixed-length windows of recorded
trajectories. Each window starts from the true state; SAIN reads the
nominal-engine deltas stored with the dataset (or replays the nominal
engine when a record carries none), so the optimizer never differentiates
through the engine.

Objective per batch:

    error_weight * mean data loss + l2_lambda * ||params||^2
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from dynamics_models.exceptions import TrainingDiverged
from dynamics_models.utils.features import (
    DYN_EFFECT,
    DYN_WIDTHS,
    EFFECT_WIDTH,
    HIDDEN_SIZES,
    REL_WIDTHS,
    SAIN,
    FeatureCodec,
    ObjectState,
    check_kind,
    dynamics_features,
    encode_actions,
    engine_deltas,
    pair_indices,
    relation_features,
)
from dynamics_models.utils.interaction_network import ModelParams, init_model
from dynamics_models.utils.loss import data_loss_and_grads
from dynamics_models.utils.nominal import NominalEngine
from dynamics_models.utils.rollout import rollout_arrays, rollout_backward
from neural.exceptions import NonFiniteGradient
from neural.utils.optim import AdamState, adam_step, clip_by_global_norm
from neural.utils.schedule import TrainConfig, lr_at
from neural.utils.standardizer import Standardizer
from sim_core.exceptions import ContractViolation

logger = logging.getLogger(__name__)

# rows used to fit the codec are capped at this many windows
CODEC_FIT_WINDOWS = 256


@dataclass
class TrainingWindows:
    state0: ObjectState
    pusher_path: np.ndarray    # (L+1, N, 2)
    pusher_radius: float
    true_pos: np.ndarray       # (L+1, N, n, 2)
    true_theta: np.ndarray     # (L+1, N, n)
    true_vel: np.ndarray       # (L+1, N, n, 3)
    engine_dvel: Optional[np.ndarray] = None   # (L, N, n, 3)
    engine_dpose: Optional[np.ndarray] = None  # (L, N, n, 4)

    def __len__(self):
        return self.state0.batch_size

    @property
    def length(self):
        return self.pusher_path.shape[0] - 1

    def take(self, indices):
        idx = np.asarray(indices, dtype=int)
        return TrainingWindows(
            state0=ObjectState(
                pos=self.state0.pos[idx], theta=self.state0.theta[idx], vel=self.state0.vel[idx],
                mass=self.state0.mass[idx], radius=self.state0.radius[idx],
            ),
            pusher_path=self.pusher_path[:, idx],
            pusher_radius=self.pusher_radius,
            true_pos=self.true_pos[:, idx],
            true_theta=self.true_theta[:, idx],
            true_vel=self.true_vel[:, idx],
            engine_dvel=None if self.engine_dvel is None else self.engine_dvel[:, idx],
            engine_dpose=None if self.engine_dpose is None else self.engine_dpose[:, idx],
        )


def build_windows(dataset, length, nominal: Optional[NominalEngine] = None, with_engine=True):
    """
    Cut every record into non-overlapping windows of ``length`` steps.

    The window length shrinks to the shortest trajectory when needed.
    Partial tail windows are dropped.
    """
    records = list(dataset.records)
    if not records:
        raise ContractViolation("Cannot build training windows from an empty dataset")
    counts = {r.trajectory.n_disks for r in records}
    if len(counts) > 1:
        raise ContractViolation(f"Training data mixes object counts {sorted(counts)}")
    radii = {r.trajectory.pusher_radius for r in records}
    if len(radii) > 1:
        raise ContractViolation("Training data mixes pusher radii")

    length = min(int(length), min(r.trajectory.n_steps for r in records))
    nominal = nominal or NominalEngine()

    pieces = []
    for record in records:
        trajectory = record.trajectory
        for start in range(0, trajectory.n_steps - length + 1, length):
            window = trajectory.window(start, start + length)
            dvel = dpose = None
            if with_engine:
                shadow = record.shadow_at(start, length)
                if shadow is not None:
                    dvel, dpose = engine_deltas(shadow.pose[:length + 1, None], shadow.twist[:length + 1, None])
                else:
                    dvel, dpose = nominal.deltas(trajectory.batch_at(start), window.pusher_pos[:, None])
            pieces.append((window, dvel, dpose))

    def stack(values, axis):
        return np.stack(values, axis=axis)

    windows = [p[0] for p in pieces]
    out = TrainingWindows(
        state0=ObjectState.from_arrays(
            stack([w.pose[0] for w in windows], 0), stack([w.twist[0] for w in windows], 0),
            stack([w.mass for w in windows], 0), stack([w.radius for w in windows], 0),
        ),
        pusher_path=stack([w.pusher_pos for w in windows], 1),
        pusher_radius=windows[0].pusher_radius,
        true_pos=stack([w.pose[..., :2] for w in windows], 1),
        true_theta=stack([w.pose[..., 2] for w in windows], 1),
        true_vel=stack([w.twist for w in windows], 1),
    )
    if with_engine:
        out.engine_dvel = np.concatenate([p[1] for p in pieces], axis=1)
        out.engine_dpose = np.concatenate([p[2] for p in pieces], axis=1)
    logger.info(f"Built {len(out)} training windows of {length} steps from {len(records)} trajectories")
    return out


def fit_codec(kind, windows: TrainingWindows, dt):
    """
    Fit input standardizers on ground-truth features and the scale-only
    output standardizer on true accelerations. Effect columns stay unscaled.
    """
    check_kind(kind)
    subset = windows.take(np.arange(min(len(windows), CODEC_FIT_WINDOWS)))
    steps = subset.length
    n = subset.state0.n_objects
    receivers, senders = pair_indices(n)

    rel_rows, dyn_rows, targets = [], [], []
    for t in range(steps):
        state = ObjectState(
            pos=subset.true_pos[t], theta=subset.true_theta[t], vel=subset.true_vel[t],
            mass=subset.state0.mass, radius=subset.state0.radius,
        )
        dvel = subset.engine_dvel[t] if kind == SAIN else None
        dpose = subset.engine_dpose[t] if kind == SAIN else None
        actions = encode_actions(state.pos, state.radius, subset.pusher_path[t], subset.pusher_path[t + 1],
                                 subset.pusher_radius, dt)
        effects = np.zeros(state.pos.shape[:2] + (EFFECT_WIDTH,))
        rel_rows.append(relation_features(state, receivers, senders, dvel).reshape(-1, REL_WIDTHS[kind]))
        dyn_rows.append(dynamics_features(state, actions, effects, dpose).reshape(-1, DYN_WIDTHS[kind]))
        targets.append(((subset.true_vel[t + 1] - subset.true_vel[t]) / dt).reshape(-1, 3))

    effect_columns = list(range(DYN_EFFECT.start, DYN_EFFECT.stop))
    return FeatureCodec(
        kind=kind,
        rel_in=Standardizer.fit(np.concatenate(rel_rows)),
        dyn_in=Standardizer.fit(np.concatenate(dyn_rows), identity_columns=effect_columns),
        dyn_out=Standardizer.fit(np.concatenate(targets), scale_only=True),
    )


def objective(params: ModelParams, windows: TrainingWindows, cfg: TrainConfig, error_weight=None):
    """
    Weighted loss of a batch of windows and its gradient.

    Returns:
        tuple: (total loss, unweighted data loss, gradient blocks)
    """
    weight = cfg.error_weight if error_weight is None else error_weight
    rollout = rollout_arrays(
        params, windows.state0, windows.pusher_path, windows.pusher_radius,
        windows.engine_dvel if params.kind == SAIN else None,
        windows.engine_dpose if params.kind == SAIN else None,
        keep_tapes=True,
    )
    data, g_pos, g_theta, g_vel = data_loss_and_grads(
        rollout.pos, rollout.theta, rollout.vel, windows.true_pos, windows.true_theta, windows.true_vel,
    )
    grads = rollout_backward(params, rollout, weight * g_pos, weight * g_theta, weight * g_vel)
    blocks = params.blocks()
    for name in grads:
        grads[name] = grads[name] + 2.0 * cfg.l2_lambda * blocks[name]
    total = weight * data + cfg.l2_lambda * params.squared_norm()
    return total, data, grads


def windows_loss(params: ModelParams, windows: TrainingWindows, chunk=100):
    """Unweighted mean data loss over all windows, forward only."""
    if len(windows) == 0:
        return math.nan
    total = 0.0
    for start in range(0, len(windows), chunk):
        part = windows.take(np.arange(start, min(start + chunk, len(windows))))
        rollout = rollout_arrays(
            params, part.state0, part.pusher_path, part.pusher_radius,
            part.engine_dvel if params.kind == SAIN else None,
            part.engine_dpose if params.kind == SAIN else None,
        )
        loss, _, _, _ = data_loss_and_grads(
            rollout.pos, rollout.theta, rollout.vel, part.true_pos, part.true_theta, part.true_vel,
        )
        total += loss * len(part)
    return total / len(windows)


def split_windows(windows: TrainingWindows, fraction, rng):
    order = rng.permutation(len(windows))
    n_val = int(math.floor(len(windows) * fraction)) if len(windows) > 1 else 0
    return windows.take(np.sort(order[n_val:])), windows.take(np.sort(order[:n_val]))


def _optimize(params, train_set, val_set, cfg: TrainConfig, iterations, lr_scale, rng, label):
    blocks = {name: np.array(value) for name, value in params.blocks().items()}
    adam = AdamState.for_blocks(blocks)
    current = params
    curve = []
    batch_size = min(cfg.batch_size, len(train_set))

    for iteration in range(iterations):
        picks = rng.choice(len(train_set), size=batch_size, replace=False)
        try:
            total, data, grads = objective(current, train_set.take(picks), cfg)
            if not math.isfinite(total):
                raise TrainingDiverged(iteration, current)
            grads, norm = clip_by_global_norm(grads, cfg.clip_norm)
            rate = lr_scale * lr_at(cfg, iteration)
            blocks, adam = adam_step(blocks, grads, adam, rate)
        except NonFiniteGradient as e:
            raise TrainingDiverged(iteration, current, f"{label}: {e}") from e
        if not all(np.all(np.isfinite(value)) for value in blocks.values()):
            raise TrainingDiverged(iteration, current)
        previous = current
        current = current.with_blocks(blocks)

        last = iteration == iterations - 1
        if iteration % cfg.log_every == 0 or iteration % cfg.decay_every == 0 or last:
            val_loss = windows_loss(previous, val_set) if len(val_set) else None
            curve.append([iteration, data, val_loss])
            logger.info(
                f"{label} iteration {iteration}: data loss {data:.6e}, total {total:.6e}, "
                f"grad norm {norm:.3e}, lr {rate:.3e}"
                + (f", validation {val_loss:.6e}" if val_loss is not None else "")
            )
    return current, curve


def train(kind, dataset, cfg: TrainConfig, nominal: Optional[NominalEngine] = None, hidden=HIDDEN_SIZES):
    """
    Fit IN or SAIN parameters on a dataset.

    Returns:
        ModelParams: with metadata holding the loss curve, config echo and seed

    Raises:
        TrainingDiverged: the loss became non-finite; carries the last good parameters
    """
    check_kind(kind)
    nominal = nominal or NominalEngine()
    windows = build_windows(dataset, cfg.rollout_length, nominal, with_engine=(kind == SAIN))
    rng = np.random.default_rng(cfg.seed)
    train_set, val_set = split_windows(windows, cfg.validation_fraction, rng)

    dt = dataset.records[0].trajectory.dt
    codec = fit_codec(kind, train_set, dt)
    params = init_model(kind, rng, codec=codec, hidden=hidden, dt=dt)
    logger.info(f"Training {kind} ({params.n_parameters()} parameters) on {len(train_set)} windows, "
                f"{len(val_set)} held out, for {cfg.iterations} iterations")

    params, curve = _optimize(params, train_set, val_set, cfg, cfg.iterations, 1.0, rng, f"train {kind}")
    metadata = {
        'loss_curve': curve,
        'train_config': cfg.to_dict(),
        'seed': cfg.seed,
        'n_windows': len(windows),
        'window_length': windows.length,
        'hidden': list(hidden),
        'nominal': nominal.to_dict(),
        'fine_tuned': False,
    }
    return replace(params, metadata=metadata)


def fine_tune(params: ModelParams, target_dataset, cfg: TrainConfig, nominal: Optional[NominalEngine] = None):
    """
    Continue training on target-domain data with a fresh schedule scaled by
    ``fine_tune_lr_scale``. The feature codec stays as pre-trained. An empty
    dataset returns the parameters unchanged.
    """
    if target_dataset is None or len(target_dataset) == 0:
        logger.info("Fine-tuning skipped: empty target dataset")
        return params

    nominal = nominal or NominalEngine()
    windows = build_windows(target_dataset, cfg.rollout_length, nominal, with_engine=(params.kind == SAIN))
    rng = np.random.default_rng([cfg.seed, 1])
    train_set, val_set = split_windows(windows, cfg.validation_fraction, rng)
    logger.info(f"Fine-tuning {params.kind} on {len(train_set)} windows for {cfg.fine_tune_iterations} iterations")

    tuned, curve = _optimize(
        params, train_set, val_set, cfg, cfg.fine_tune_iterations, cfg.fine_tune_lr_scale, rng,
        f"fine-tune {params.kind}",
    )
    metadata = dict(params.metadata)
    metadata.update({'fine_tune_curve': curve, 'fine_tune_config': cfg.to_dict(), 'fine_tuned': True})
    return replace(tuned, metadata=metadata)
