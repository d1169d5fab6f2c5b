"""
Per-feature standardization fitted on training data.
"""

from dataclasses import dataclass

import numpy as np

from sim_core.exceptions import ContractViolation

STD_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        std = np.maximum(np.array(self.std, dtype=np.float64).reshape(-1), STD_FLOOR)
        if mean.shape != std.shape:
            raise ContractViolation(f"Standardizer mean {mean.shape} and std {std.shape} differ")
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'std', std)

    @property
    def width(self):
        return self.mean.shape[0]

    @classmethod
    def identity(cls, width):
        return cls(mean=np.zeros(width), std=np.ones(width))

    @classmethod
    def fit(cls, data, scale_only=False, identity_columns=()):
        """
        Fit on rows of ``data`` (..., width).

        ``scale_only`` keeps the mean at zero (root-mean-square scaling) so a
        zero network output decodes to a zero change. ``identity_columns``
        are left unscaled.
        """
        rows = np.asarray(data, dtype=np.float64)
        rows = rows.reshape(-1, rows.shape[-1])
        if rows.shape[0] == 0:
            return cls.identity(rows.shape[1])
        if scale_only:
            mean = np.zeros(rows.shape[1])
            std = np.sqrt(np.mean(rows * rows, axis=0))
        else:
            mean = rows.mean(axis=0)
            std = rows.std(axis=0)
        std = np.maximum(std, STD_FLOOR)
        columns = list(identity_columns)
        if columns:
            mean[columns] = 0.0
            std[columns] = 1.0
        return cls(mean=mean, std=std)

    def _check(self, x):
        if np.shape(x)[-1] != self.width:
            raise ContractViolation(f"Standardizer of width {self.width} given shape {np.shape(x)}")

    def apply(self, x):
        self._check(x)
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def invert(self, y):
        self._check(y)
        return np.asarray(y, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {'mean': self.mean.tolist(), 'std': self.std.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(mean=np.array(data['mean']), std=np.array(data['std']))
