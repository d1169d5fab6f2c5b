"""
Adam over named parameter blocks, plus global-norm gradient clipping.

Blocks are plain dicts of name -> array. Iteration order of the dict is the
summation order, so results are reproducible bit for bit.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from neural.exceptions import NonFiniteGradient
from sim_core.exceptions import ContractViolation

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_blocks(cls, blocks, **kwargs):
        return cls(
            first_moment={name: np.zeros_like(value) for name, value in blocks.items()},
            second_moment={name: np.zeros_like(value) for name, value in blocks.items()},
            **kwargs,
        )


def check_finite(grads):
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(name)


def adam_step(params, grads, state: AdamState, rate):
    """
    One bias-corrected Adam update.

    Args:
        params: dict name -> array
        grads: dict with the same names and shapes
        state: AdamState (not modified)
        rate: learning rate

    Returns:
        tuple: (new params dict, new AdamState)

    Raises:
        NonFiniteGradient: naming the first offending block
        ContractViolation: names or shapes disagree
    """
    if list(params) != list(grads):
        raise ContractViolation(f"Gradient blocks {list(grads)} do not match parameter blocks {list(params)}")
    for name in params:
        if np.shape(params[name]) != np.shape(grads[name]):
            raise ContractViolation(
                f"Gradient for '{name}' has shape {np.shape(grads[name])}, expected {np.shape(params[name])}"
            )
    check_finite(grads)

    step_count = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** step_count
    correction2 = 1.0 - b2 ** step_count

    new_params, first, second = {}, {}, {}
    for name, value in params.items():
        g = grads[name]
        m = b1 * state.first_moment.get(name, np.zeros_like(g)) + (1.0 - b1) * g
        v = b2 * state.second_moment.get(name, np.zeros_like(g)) + (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = value - rate * m_hat / (np.sqrt(v_hat) + state.eps)
        first[name] = m
        second[name] = v

    new_state = AdamState(
        first_moment=first, second_moment=second, step_count=step_count,
        beta1=b1, beta2=b2, eps=state.eps,
    )
    return new_params, new_state


def global_norm(grads):
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_by_global_norm(grads, max_norm):
    """
    Scale all blocks together so their joint L2 norm is at most ``max_norm``.

    Returns:
        tuple: (clipped grads dict, norm before clipping)
    """
    norm = global_norm(grads)
    if max_norm is None or norm <= max_norm or norm == 0.0:
        return dict(grads), norm
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}, norm
