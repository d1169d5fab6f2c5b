"""
Trajectory loss: position, velocity and sin/cos rotation squared errors,
summed over objects, averaged over the T predicted steps and the batch,
plus an L2 penalty on all network parameters.
"""

import numpy as np

from sim_core.exceptions import ContractViolation
from sim_core.utils.trajectory import Trajectory


def _as_arrays(seq):
    """(pos, theta, vel) with shapes (T+1, B, n, 2), (T+1, B, n), (T+1, B, n, 3)."""
    if isinstance(seq, Trajectory):
        return seq.pose[:, None, :, :2], seq.pose[:, None, :, 2], seq.twist[:, None]
    if hasattr(seq, 'pos'):
        return seq.pos, seq.theta, seq.vel
    pos, theta, vel = seq
    return np.asarray(pos), np.asarray(theta), np.asarray(vel)


def data_loss_and_grads(pred_pos, pred_theta, pred_vel, true_pos, true_theta, true_vel):
    """
    Unweighted data term and its gradient w.r.t. the predictions.

    State 0 is the given initial state and does not count.

    Returns:
        tuple: (loss, g_pos, g_theta, g_vel)
    """
    steps = pred_pos.shape[0] - 1
    if pred_pos.shape != true_pos.shape or pred_vel.shape != true_vel.shape:
        raise ContractViolation(f"Prediction {pred_pos.shape} and truth {true_pos.shape} differ in shape")
    if steps < 1:
        raise ContractViolation("Loss needs at least one predicted step")
    batch = pred_pos.shape[1]
    scale = 1.0 / (steps * batch)

    d_pos = pred_pos[1:] - true_pos[1:]
    d_vel = pred_vel[1:] - true_vel[1:]
    sin_p, cos_p = np.sin(pred_theta[1:]), np.cos(pred_theta[1:])
    d_sin = sin_p - np.sin(true_theta[1:])
    d_cos = cos_p - np.cos(true_theta[1:])

    loss = scale * (np.sum(d_pos * d_pos) + np.sum(d_vel * d_vel) + np.sum(d_sin * d_sin) + np.sum(d_cos * d_cos))

    g_pos = np.zeros_like(pred_pos)
    g_theta = np.zeros_like(pred_theta)
    g_vel = np.zeros_like(pred_vel)
    g_pos[1:] = 2.0 * scale * d_pos
    g_vel[1:] = 2.0 * scale * d_vel
    g_theta[1:] = 2.0 * scale * (d_sin * cos_p - d_cos * sin_p)
    return float(loss), g_pos, g_theta, g_vel


def trajectory_loss(pred, truth, params=None, lam=0.0):
    """
    Loss of a predicted trajectory (or batch of them) against the truth.

    Args:
        pred, truth: Trajectory, ModelRollout or (pos, theta, vel) arrays
        params: ModelParams for the regularizer (ignored when lam is 0)
        lam: L2 coefficient

    Example:
        a single object off by (3, 4) mm for one step gives 25e-6
    """
    pred_pos, pred_theta, pred_vel = _as_arrays(pred)
    true_pos, true_theta, true_vel = _as_arrays(truth)
    if pred_pos.shape[2] != true_pos.shape[2]:
        raise ContractViolation("Prediction and truth have different object counts")
    loss, _, _, _ = data_loss_and_grads(pred_pos, pred_theta, pred_vel, true_pos, true_theta, true_vel)
    if lam and params is not None:
        loss += lam * params.squared_norm()
    return loss
