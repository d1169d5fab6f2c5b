"""
Receding-Horizon Search
=======================
Best-first search over sequences of discrete pushes. Every expansion
simulates all 72 children of a node as one batch through the planning
model; nodes are ordered by (heuristic cost, action indices), so ties go
to the lowest action index and the search is deterministic.
"""

import heapq
import logging
from dataclasses import dataclass, field, fields
from typing import Any, Tuple

import numpy as np

from planner.utils.actions import enumerate_actions, push_geometry
from planner.utils.heuristic import heuristic
from sim_core.utils.batch import WorldBatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerConfig:
    horizon_near: int = 3
    horizon_far: int = 2
    switch_distance: float = 0.010
    max_episode_actions: int = 60
    queue_capacity: int = 4096
    settle_steps: int = 24

    def __post_init__(self):
        if self.horizon_near < 1 or self.horizon_far < 1:
            raise ValueError("PlannerConfig horizons must be at least 1")
        if self.switch_distance < 0:
            raise ValueError(f"PlannerConfig.switch_distance must be non-negative, got {self.switch_distance}")
        if self.max_episode_actions < 0:
            raise ValueError(f"PlannerConfig.max_episode_actions must be non-negative, got {self.max_episode_actions}")
        if self.queue_capacity < 1:
            raise ValueError(f"PlannerConfig.queue_capacity must be positive, got {self.queue_capacity}")
        if self.settle_steps < 0:
            raise ValueError(f"PlannerConfig.settle_steps must be non-negative, got {self.settle_steps}")

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"Unknown PlannerConfig fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(order=True)
class PlanNode:
    cost: float
    actions: Tuple[int, ...]
    state: Any = field(compare=False, default=None)


def active_horizon(distance, cfg: PlannerConfig):
    """Longer lookahead once disk 2 is within ``switch_distance`` of the goal."""
    return cfg.horizon_near if distance < cfg.switch_distance else cfg.horizon_far


def simulate_actions(model, batch: WorldBatch, actions, dt, settle_steps, object_index=0, target_index=1):
    """
    Predict the world after each action from one state.

    Args:
        model: ForwardModel
        batch: a single state (batch of one)
        actions: ControlActions, simulated side by side

    Returns:
        WorldBatch: one predicted state per action, pusher at the end of its path
    """
    n = len(actions)
    starts = batch.take(np.zeros(n, dtype=int))
    contact = np.array([a.contact_angle for a in actions])
    push = np.array([a.push_angle for a in actions])
    start, direction = push_geometry(
        starts.pose[:, object_index, :2], starts.pose[:, target_index, :2], starts.radius[:, object_index],
        starts.pusher_radius, contact, push,
    )
    steps = actions[0].n_steps(dt)
    speed = np.array([a.push_speed for a in actions])[:, None]
    offsets = np.arange(steps + 1)[:, None, None] * dt * speed[None] * direction[None]
    path = start[None] + offsets
    if settle_steps:
        path = np.concatenate([path, np.repeat(path[-1:], settle_steps, axis=0)])

    starts.pusher_pos = start
    starts.pusher_vel = np.zeros_like(start)
    predicted = model.predict(starts, path)
    out = starts.copy()
    out.pose = predicted['pose'][-1]
    out.twist = predicted['twist'][-1]
    out.pusher_pos = path[-1].copy()
    return out


def plan_next(world, goal, model, cfg: PlannerConfig, dt, cost_fn=heuristic, object_index=0, target_index=1):
    """
    First action of the cheapest action sequence of the active horizon.

    Args:
        world (WorldState): current observation
        goal (Goal): target for disk 2
        model: planning ForwardModel (physics, IN or SAIN)
        cfg: PlannerConfig
        dt: model step
        cost_fn: heuristic(p1, p2, goal) on batched positions

    Returns:
        ControlAction: falls back to the best single push when the queue
        runs dry or its capacity is spent
    """
    actions = enumerate_actions()
    goal_xy = np.array(goal.position)
    root = WorldBatch.from_world(world)
    horizon = active_horizon(goal.distance(root.pose[0, target_index, :2]), cfg)

    def expand(node):
        children = simulate_actions(model, node.state, actions, dt, cfg.settle_steps, object_index, target_index)
        costs = cost_fn(children.pose[:, object_index, :2], children.pose[:, target_index, :2], goal_xy)
        costs = np.where(np.isfinite(costs), costs, np.inf)
        return [
            PlanNode(cost=float(costs[k]), actions=node.actions + (k,), state=children.take([k]))
            for k in range(len(actions))
        ]

    queue = []
    generated = 0
    first_level = expand(PlanNode(cost=0.0, actions=(), state=root))
    greedy = min(first_level)
    for node in first_level:
        heapq.heappush(queue, node)
    generated += len(first_level)

    while queue:
        node = heapq.heappop(queue)
        if len(node.actions) == horizon:
            logger.debug(f"Plan {node.actions} at cost {node.cost:.5f} after {generated} nodes (horizon {horizon})")
            return actions[node.actions[0]]
        if generated + len(actions) > cfg.queue_capacity:
            break
        for child in expand(node):
            heapq.heappush(queue, child)
        generated += len(actions)

    logger.debug(f"Search stopped after {generated} nodes; taking the best single push {greedy.actions}")
    return actions[greedy.actions[0]]
