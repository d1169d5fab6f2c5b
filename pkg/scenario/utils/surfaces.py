"""
Smooth random friction fields for the surrogate real world.
"""

import logging
import math

import numpy as np

from scenario.utils.specs import MU_FIELD_BOUNDS, SurrogateRealSpec
from sim_core.constants import SURFACE_SPATIAL_FIELD
from sim_core.utils.state import SurfaceModel

logger = logging.getLogger(__name__)

# keeps clipped values strictly inside the open bounds
_EDGE = 1e-6


def fourier_field(points, n_modes, correlation_length, rng):
    """
    Random Fourier features of a squared-exponential field, zero mean and
    unit variance in expectation.

    Args:
        points: (..., 2) sample positions
    """
    wavevectors = rng.normal(scale=1.0 / correlation_length, size=(n_modes, 2))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=n_modes)
    return math.sqrt(2.0 / n_modes) * np.cos(points @ wavevectors.T + phases).sum(axis=-1)


def random_mu_field(spec: SurrogateRealSpec, rng):
    """
    Square friction grid centred on the origin, rescaled to
    ``mu_mean +- mu_amplitude`` and clipped into the field bounds.

    Returns:
        SurfaceModel: spatial_field surface
    """
    half = spec.field_extent / 2.0
    nodes = int(round(spec.field_extent / spec.field_spacing)) + 1
    axis = -half + spec.field_spacing * np.arange(nodes)
    grid_x, grid_y = np.meshgrid(axis, axis, indexing='ij')
    raw = fourier_field(np.stack([grid_x, grid_y], axis=-1), spec.n_modes, spec.correlation_length, rng)

    raw = raw - raw.mean()
    peak = np.max(np.abs(raw))
    scaled = raw / peak if peak > 0 else raw
    low, high = MU_FIELD_BOUNDS
    mu = np.clip(spec.mu_mean + spec.mu_amplitude * scaled, low + _EDGE, high - _EDGE)
    logger.debug(f"Friction field {mu.shape}: min {mu.min():.4f}, mean {mu.mean():.4f}, max {mu.max():.4f}")

    return SurfaceModel(
        mode=SURFACE_SPATIAL_FIELD,
        mu_nominal=spec.mu_mean,
        mu_field=mu,
        field_origin=(-half, -half),
        field_spacing=spec.field_spacing,
    )
