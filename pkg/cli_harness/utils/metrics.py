"""
Prediction metrics per object at the evaluation horizon.

    pos_mm     mean Euclidean position error, millimeters
    rot_deg    mean absolute heading error wrapped to [0, 180], degrees
    trans_pct  mean of position error over that object's true displacement
               from its initial pose, percent; trajectories where the object
               did not move are left out of this mean only
"""

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
import pandas as pd

from sim_core.exceptions import ContractViolation
from sim_core.utils.state import wrap_angle

METRIC_COLUMNS = ['model', 'object', 'trans_pct', 'pos_mm', 'rot_deg']
TRANS_DEFINITION = 'final position error / ground-truth displacement from the initial pose'


@dataclass
class ObjectMetrics:
    object: int
    trans_pct: float
    pos_mm: float
    rot_deg: float
    n_trajectories: int
    n_trans: int

    def to_dict(self):
        return {
            'object': self.object,
            'trans_pct': None if math.isnan(self.trans_pct) else self.trans_pct,
            'pos_mm': self.pos_mm,
            'rot_deg': self.rot_deg,
            'n_trajectories': self.n_trajectories,
            'n_trans': self.n_trans,
        }


@dataclass
class MetricsReport:
    model: str
    horizon: int
    objects: List[ObjectMetrics] = field(default_factory=list)
    dataset: str = ''

    def to_frame(self):
        return pd.DataFrame(
            [[self.model, m.object, m.trans_pct, m.pos_mm, m.rot_deg] for m in self.objects],
            columns=METRIC_COLUMNS,
        )

    def to_dict(self):
        return {
            'model': self.model,
            'horizon': self.horizon,
            'dataset': self.dataset,
            'trans_definition': TRANS_DEFINITION,
            'objects': [m.to_dict() for m in self.objects],
        }

    @classmethod
    def from_dict(cls, data):
        objects = [
            ObjectMetrics(
                object=o['object'],
                trans_pct=math.nan if o['trans_pct'] is None else o['trans_pct'],
                pos_mm=o['pos_mm'], rot_deg=o['rot_deg'],
                n_trajectories=o['n_trajectories'], n_trans=o['n_trans'],
            )
            for o in data['objects']
        ]
        return cls(model=data['model'], horizon=data['horizon'], objects=objects, dataset=data.get('dataset', ''))


def compute_metrics(pred_pose, true_pose, initial_pose, model='model', horizon=0, dataset=''):
    """
    Aggregate final-horizon errors.

    Args:
        pred_pose: (M, n, 3) predicted poses at the horizon
        true_pose: (M, n, 3) ground truth at the horizon
        initial_pose: (M, n, 3) ground truth at the start

    Returns:
        MetricsReport: one row per object

    Example:
        5 mm error on an object that truly moved 100 mm gives trans 5%.
    """
    pred_pose = np.asarray(pred_pose, dtype=float)
    true_pose = np.asarray(true_pose, dtype=float)
    initial_pose = np.asarray(initial_pose, dtype=float)
    if pred_pose.shape != true_pose.shape or true_pose.shape != initial_pose.shape or pred_pose.ndim != 3:
        raise ContractViolation(
            f"Metric inputs must share an (M, n, 3) shape, got {pred_pose.shape}, {true_pose.shape}, "
            f"{initial_pose.shape}"
        )

    pos_error = np.linalg.norm(pred_pose[..., :2] - true_pose[..., :2], axis=-1)
    rot_error = np.abs(wrap_angle(pred_pose[..., 2] - true_pose[..., 2]))
    displacement = np.linalg.norm(true_pose[..., :2] - initial_pose[..., :2], axis=-1)
    moved = displacement > 0.0

    objects = []
    for i in range(pred_pose.shape[1]):
        valid = moved[:, i]
        trans = 100.0 * pos_error[valid, i] / displacement[valid, i]
        objects.append(ObjectMetrics(
            object=i + 1,
            trans_pct=float(np.mean(trans)) if trans.size else math.nan,
            pos_mm=float(np.mean(pos_error[:, i]) * 1e3),
            rot_deg=float(np.degrees(np.mean(rot_error[:, i]))),
            n_trajectories=int(pred_pose.shape[0]),
            n_trans=int(valid.sum()),
        ))
    return MetricsReport(model=model, horizon=horizon, objects=objects, dataset=dataset)


def metrics_frame(reports):
    """All reports as one table in the CSV schema."""
    if not reports:
        return pd.DataFrame(columns=METRIC_COLUMNS)
    return pd.concat([r.to_frame() for r in reports], ignore_index=True)
