"""
Interaction Network Step
========================
One recurrent step of IN or SAIN on batched object states, with its
hand-derived reverse pass.

    e_i    = sum_{j != i} f_rel(relation row (i, j))
    v'_i   = v_i + dt * f_dyn(dynamics row i)
    p'_i   = p_i + dt * v'_i

SAIN rows carry the nominal engine's per-step deltas as extra columns.
Mass and radius pass through unchanged.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from dynamics_models.utils.features import (
    DYN_EFFECT,
    DYN_OUT_WIDTH,
    DYN_VEL,
    DYN_WIDTHS,
    EFFECT_WIDTH,
    HIDDEN_SIZES,
    IN,
    REL_COS,
    REL_DPOS,
    REL_DVEL,
    REL_SIN,
    REL_VEL,
    REL_WIDTHS,
    SAIN,
    FeatureCodec,
    ObjectState,
    check_kind,
    dynamics_features,
    encode_actions,
    pair_indices,
    relation_features,
)
from neural.utils.mlp import MlpParams, init_mlp, mlp_backward, mlp_forward, zero_mlp
from neural.utils.standardizer import Standardizer
from sim_core.constants import DEFAULT_DT
from sim_core.exceptions import ContractViolation
from sim_core.utils.batch import WorldBatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ModelParams:
    kind: str
    f_rel: MlpParams
    f_dyn: MlpParams
    codec: FeatureCodec
    dt: float = DEFAULT_DT
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        check_kind(self.kind)
        if self.codec.kind != self.kind:
            raise ContractViolation(f"{self.kind} model given a {self.codec.kind} codec")
        if self.f_rel.in_width != REL_WIDTHS[self.kind] or self.f_rel.out_width != EFFECT_WIDTH:
            raise ContractViolation(
                f"{self.kind} f_rel must map {REL_WIDTHS[self.kind]} -> {EFFECT_WIDTH}, "
                f"got {self.f_rel.in_width} -> {self.f_rel.out_width}"
            )
        if self.f_dyn.in_width != DYN_WIDTHS[self.kind] or self.f_dyn.out_width != DYN_OUT_WIDTH:
            raise ContractViolation(
                f"{self.kind} f_dyn must map {DYN_WIDTHS[self.kind]} -> {DYN_OUT_WIDTH}, "
                f"got {self.f_dyn.in_width} -> {self.f_dyn.out_width}"
            )

    def blocks(self):
        """All parameters as named blocks: f_rel.W0, f_rel.b0, ..., f_dyn.W0, ..."""
        out = {f'f_rel.{name}': value for name, value in self.f_rel.blocks().items()}
        out.update({f'f_dyn.{name}': value for name, value in self.f_dyn.blocks().items()})
        return out

    def with_blocks(self, blocks, **changes):
        f_rel = MlpParams.from_blocks({k[len('f_rel.'):]: v for k, v in blocks.items() if k.startswith('f_rel.')})
        f_dyn = MlpParams.from_blocks({k[len('f_dyn.'):]: v for k, v in blocks.items() if k.startswith('f_dyn.')})
        return ModelParams(
            kind=self.kind, f_rel=f_rel, f_dyn=f_dyn,
            codec=changes.get('codec', self.codec), dt=self.dt,
            metadata=changes.get('metadata', self.metadata),
        )

    def squared_norm(self):
        return self.f_rel.squared_norm() + self.f_dyn.squared_norm()

    def n_parameters(self):
        return self.f_rel.n_parameters() + self.f_dyn.n_parameters()


def network_sizes(kind, hidden=HIDDEN_SIZES):
    check_kind(kind)
    rel = [REL_WIDTHS[kind], *hidden, EFFECT_WIDTH]
    dyn = [DYN_WIDTHS[kind], *hidden, DYN_OUT_WIDTH]
    return rel, dyn


def init_model(kind, rng, codec=None, hidden=HIDDEN_SIZES, dt=DEFAULT_DT):
    """Glorot-initialized f_rel then f_dyn, drawn from ``rng`` in that order."""
    rel, dyn = network_sizes(kind, hidden)
    return ModelParams(
        kind=kind, f_rel=init_mlp(rel, rng), f_dyn=init_mlp(dyn, rng),
        codec=codec or FeatureCodec.identity(kind), dt=dt,
    )


def zero_model(kind, codec=None, hidden=HIDDEN_SIZES, dt=DEFAULT_DT):
    rel, dyn = network_sizes(kind, hidden)
    return ModelParams(
        kind=kind, f_rel=zero_mlp(rel), f_dyn=zero_mlp(dyn),
        codec=codec or FeatureCodec.identity(kind), dt=dt,
    )


@dataclass(frozen=True, eq=False)
class StepTape:
    rel_raw: np.ndarray
    rel_tape: object
    dyn_tape: object
    receivers: np.ndarray
    senders: np.ndarray


def _check_deltas(params, engine_dvel, engine_dpose):
    has_deltas = engine_dvel is not None and engine_dpose is not None
    if params.kind == SAIN and not has_deltas:
        raise ContractViolation("SAIN step needs the nominal engine's velocity and pose deltas")
    if params.kind == IN and (engine_dvel is not None or engine_dpose is not None):
        raise ContractViolation("IN step takes no engine deltas")


def model_step(params: ModelParams, state: ObjectState, actions, engine_dvel=None, engine_dpose=None):
    """
    Advance batched object states one step.

    Args:
        params: IN or SAIN parameters
        state: current states
        actions: (B, n, 2) action encoding
        engine_dvel: SAIN only, (B, n, 3) v_bar(t+1) - v_bar(t)
        engine_dpose: SAIN only, (B, n, 4) engine pose delta

    Returns:
        tuple: (ObjectState, StepTape)
    """
    _check_deltas(params, engine_dvel, engine_dpose)
    codec = params.codec
    batch, n = state.mass.shape
    receivers, senders = pair_indices(n)

    rel_raw = relation_features(state, receivers, senders, engine_dvel)
    rel_out, rel_tape = mlp_forward(params.f_rel, codec.rel_in.apply(rel_raw))
    effects = rel_out.reshape(batch, n, max(n - 1, 0), EFFECT_WIDTH).sum(axis=2)

    dyn_raw = dynamics_features(state, actions, effects, engine_dpose)
    dyn_out, dyn_tape = mlp_forward(params.f_dyn, codec.dyn_in.apply(dyn_raw))
    acceleration = codec.dyn_out.invert(dyn_out)

    vel = state.vel + params.dt * acceleration
    nxt = ObjectState(
        pos=state.pos + params.dt * vel[..., :2],
        theta=state.theta + params.dt * vel[..., 2],
        vel=vel,
        mass=state.mass,
        radius=state.radius,
    )
    tape = StepTape(rel_raw=rel_raw, rel_tape=rel_tape, dyn_tape=dyn_tape, receivers=receivers, senders=senders)
    return nxt, tape


def model_step_backward(params: ModelParams, tape: StepTape, g_pos, g_theta, g_vel):
    """
    Reverse pass of model_step.

    Args:
        g_pos, g_theta, g_vel: loss gradients w.r.t. the step's output state

    Returns:
        tuple: (param gradient blocks, (g_pos, g_theta, g_vel) w.r.t. the input state)
    """
    dt = params.dt
    codec = params.codec
    batch, n = g_theta.shape

    # p' = p + dt v'[:2], th' = th + dt v'[2]
    g_new_vel = np.array(g_vel, dtype=np.float64)
    g_new_vel[..., :2] += dt * g_pos
    g_new_vel[..., 2] += dt * g_theta

    in_pos = np.array(g_pos, dtype=np.float64)
    in_theta = np.array(g_theta, dtype=np.float64)
    in_vel = g_new_vel.copy()

    g_dyn_out = dt * g_new_vel * codec.dyn_out.std
    dyn_grads, g_dyn_in = mlp_backward(params.f_dyn, tape.dyn_tape, g_dyn_out)
    g_dyn_raw = g_dyn_in / codec.dyn_in.std
    in_vel += g_dyn_raw[..., DYN_VEL]

    g_effects = g_dyn_raw[..., DYN_EFFECT]
    g_rel_out = np.repeat(g_effects, max(n - 1, 0), axis=1)
    rel_grads, g_rel_in = mlp_backward(params.f_rel, tape.rel_tape, g_rel_out)
    g_rel = g_rel_in / codec.rel_in.std

    rows = tape.rel_raw
    g_dth = g_rel[..., REL_SIN] * rows[..., REL_COS] - g_rel[..., REL_COS] * rows[..., REL_SIN]
    g_dvel = g_rel[..., REL_DVEL]
    g_dpos = g_rel[..., REL_DPOS]

    if n > 1:
        def per_receiver(values):
            return values.reshape((batch, n, n - 1) + values.shape[2:]).sum(axis=2)

        in_vel += per_receiver(g_rel[..., REL_VEL] + g_dvel)
        in_pos += per_receiver(g_dpos)
        in_theta += per_receiver(g_dth)
        np.add.at(in_vel, (slice(None), tape.senders), -g_dvel)
        np.add.at(in_pos, (slice(None), tape.senders), -g_dpos)
        np.add.at(in_theta, (slice(None), tape.senders), -g_dth)

    grads = {f'f_rel.{name}': value for name, value in rel_grads.items()}
    grads.update({f'f_dyn.{name}': value for name, value in dyn_grads.items()})
    return grads, (in_pos, in_theta, in_vel)


def _single_step(params, world, actions, engine_dvel=None, engine_dpose=None):
    batch = WorldBatch.from_world(world)
    state = ObjectState.from_batch(batch)
    actions = np.asarray(actions, dtype=np.float64).reshape(1, world.n_disks, 2)
    nxt, _ = model_step(params, state, actions, engine_dvel, engine_dpose)
    return nxt.to_batch(batch).world(0)


def in_step(state, actions, params: ModelParams):
    """
    IN prediction of the next WorldState.

    Args:
        state (WorldState): current world
        actions: (n, 2) action encoding
        params: kind IN
    """
    if params.kind != IN:
        raise ContractViolation(f"in_step needs IN parameters, got {params.kind}")
    return _single_step(params, state, actions)


def sain_step(state, phys_prev, phys_next, actions, params: ModelParams):
    """
    SAIN prediction of the next WorldState.

    ``phys_prev`` and ``phys_next`` are consecutive states of the nominal
    engine's own rollout; their difference is the engine's guess for the step.
    """
    if params.kind != SAIN:
        raise ContractViolation(f"sain_step needs SAIN parameters, got {params.kind}")
    prev = WorldBatch.from_world(phys_prev)
    nxt = WorldBatch.from_world(phys_next)
    if prev.n_disks != state.n_disks or nxt.n_disks != state.n_disks:
        raise ContractViolation("Engine states must have the same object count as the model state")
    dvel = nxt.twist - prev.twist
    dth = nxt.pose[..., 2] - prev.pose[..., 2]
    dpose = np.concatenate(
        [nxt.pose[..., :2] - prev.pose[..., :2], np.sin(dth)[..., None], np.cos(dth)[..., None]], axis=-1,
    )
    return _single_step(params, state, actions, dvel, dpose)


def step_actions(state: ObjectState, pusher_from, pusher_to, pusher_radius, dt):
    return encode_actions(state.pos, state.radius, pusher_from, pusher_to, pusher_radius, dt)


def widen_in_to_sain(params: ModelParams):
    """SAIN parameters whose extra input columns have zero weights and unit scaling."""
    if params.kind != IN:
        raise ContractViolation("Only IN parameters can be widened")
    extra_rel = REL_WIDTHS[SAIN] - REL_WIDTHS[IN]
    extra_dyn = DYN_WIDTHS[SAIN] - DYN_WIDTHS[IN]

    def extend(standardizer, extra):
        return Standardizer(
            mean=np.concatenate([standardizer.mean, np.zeros(extra)]),
            std=np.concatenate([standardizer.std, np.ones(extra)]),
        )

    codec = FeatureCodec(
        kind=SAIN,
        rel_in=extend(params.codec.rel_in, extra_rel),
        dyn_in=extend(params.codec.dyn_in, extra_dyn),
        dyn_out=params.codec.dyn_out,
    )
    return ModelParams(
        kind=SAIN,
        f_rel=params.f_rel.with_input_columns(extra_rel),
        f_dyn=params.f_dyn.with_input_columns(extra_dyn),
        codec=codec,
        dt=params.dt,
    )
