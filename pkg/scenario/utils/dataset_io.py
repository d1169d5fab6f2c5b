"""
Dataset Files
=============
JSON Lines: a header line with the dataset metadata, then one line per
trajectory. Floats are written with their shortest round-trip repr, so a
load reproduces every stored array exactly. A spatial friction field is
stored once in the header and referenced from the trajectory lines.
"""

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from scenario.exceptions import DatasetFormatError
from scenario.utils.records import DATASET_FORMAT_VERSION, Dataset, ShadowWindow, TrajectoryRecord
from sim_core.constants import SURFACE_SPATIAL_FIELD
from sim_core.exceptions import ContractViolation
from sim_core.utils.contacts import ContactDiagnostics
from sim_core.utils.state import SurfaceModel
from sim_core.utils.trajectory import Trajectory

logger = logging.getLogger(__name__)

DATASET_FORMAT = 'pushlab-dataset'
SHARED_SURFACE = 'header'


def _reject_constant(token):
    raise ValueError(f"non-finite value {token}")


def _finite_float(token):
    value = float(token)
    if not np.isfinite(value):
        raise ValueError(f"non-finite value {token}")
    return value


def _loads(text):
    return json.loads(text, parse_constant=_reject_constant, parse_float=_finite_float)


def _shared_surface(dataset):
    """The spatial field every trajectory uses, or None."""
    surfaces = {id(r.trajectory.surface): r.trajectory.surface for r in dataset.records}
    if len(surfaces) != 1:
        return None
    surface = next(iter(surfaces.values()))
    return surface if surface.mode == SURFACE_SPATIAL_FIELD else None


def _record_line(record, shared):
    t = record.trajectory
    return {
        'index': record.index,
        'params': record.params,
        'dt': t.dt,
        'mass': t.mass.tolist(),
        'radius': t.radius.tolist(),
        'pusher_radius': t.pusher_radius,
        'pusher_mass': t.pusher_mass,
        'surface': SHARED_SURFACE if shared is not None and t.surface is shared else t.surface.to_dict(),
        'diagnostics': t.diagnostics.to_dict(),
        'pose': t.pose.tolist(),
        'twist': t.twist.tolist(),
        'pusher_pos': t.pusher_pos.tolist(),
        'pusher_vel': t.pusher_vel.tolist(),
        'commands': t.commands.tolist(),
        'shadows': [
            {'start': s.start, 'pose': s.pose.tolist(), 'twist': s.twist.tolist()} for s in record.shadows
        ],
    }


def dumps_dataset(dataset: Dataset):
    shared = _shared_surface(dataset)
    header = {'format': DATASET_FORMAT, **dataset.metadata, 'n_trajectories': len(dataset)}
    header['shared_surface'] = shared.to_dict() if shared is not None else None
    lines = [json.dumps(header, allow_nan=False)]
    lines.extend(json.dumps(_record_line(r, shared), allow_nan=False) for r in dataset.records)
    return '\n'.join(lines) + '\n'


def save_dataset(dataset: Dataset, path):
    """
    Write a dataset to ``path``.

    Returns:
        str: sha256 of the written file
    """
    try:
        text = dumps_dataset(dataset)
    except ValueError as e:
        raise ContractViolation(f"Dataset holds non-finite values: {e}") from e
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode('utf-8')
    path.write_bytes(data)
    digest = hashlib.sha256(data).hexdigest()
    logger.info(f"Saved {len(dataset)} trajectories to {path} (sha256 {digest[:12]})")
    return digest


def _array(line, key):
    return np.array(line[key], dtype=np.float64)


def _parse_record(line, shared):
    surface = shared if line['surface'] == SHARED_SURFACE else SurfaceModel.from_dict(line['surface'])
    if surface is None:
        raise ValueError("trajectory references a shared surface the header does not carry")
    diagnostics = line.get('diagnostics', {})
    trajectory = Trajectory(
        dt=float(line['dt']),
        pose=_array(line, 'pose'),
        twist=_array(line, 'twist'),
        mass=_array(line, 'mass'),
        radius=_array(line, 'radius'),
        pusher_pos=_array(line, 'pusher_pos'),
        pusher_vel=_array(line, 'pusher_vel'),
        commands=_array(line, 'commands').reshape(-1, 2),
        pusher_radius=float(line['pusher_radius']),
        pusher_mass=None if line['pusher_mass'] is None else float(line['pusher_mass']),
        surface=surface,
        diagnostics=ContactDiagnostics(**diagnostics),
    )
    shadows = [
        ShadowWindow(start=int(s['start']), pose=_array(s, 'pose'), twist=_array(s, 'twist'))
        for s in line['shadows']
    ]
    return TrajectoryRecord(index=int(line['index']), trajectory=trajectory, shadows=shadows, params=line['params'])


def load_dataset(path):
    """
    Read a dataset file.

    Raises:
        DatasetFormatError: wrong format or version, malformed or truncated
            line, non-finite value, or missing trajectories; names the line
    """
    path = Path(path)
    with path.open('r', encoding='utf-8') as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise DatasetFormatError(path, 1, "empty file")

    try:
        header = _loads(lines[0])
    except ValueError as e:
        raise DatasetFormatError(path, 1, f"unreadable header: {e}") from e
    if header.get('format') != DATASET_FORMAT:
        raise DatasetFormatError(path, 1, f"not a dataset file (format {header.get('format')!r})")
    if header.get('version') != DATASET_FORMAT_VERSION:
        raise DatasetFormatError(
            path, 1, f"unsupported version {header.get('version')!r}, expected {DATASET_FORMAT_VERSION}",
        )

    try:
        shared = header.get('shared_surface')
        shared = SurfaceModel.from_dict(shared) if shared is not None else None
    except (TypeError, ValueError) as e:
        raise DatasetFormatError(path, 1, f"bad shared surface: {e}") from e

    records = []
    for number, text in enumerate(lines[1:], start=2):
        try:
            records.append(_parse_record(_loads(text), shared))
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetFormatError(path, number, f"bad trajectory line: {e}") from e

    expected = header.get('n_trajectories')
    if expected is not None and expected != len(records):
        raise DatasetFormatError(path, len(lines) + 1, f"expected {expected} trajectories, found {len(records)}")

    metadata = {k: v for k, v in header.items() if k not in ('format', 'n_trajectories', 'shared_surface')}
    try:
        dataset = Dataset(metadata=metadata, records=records)
    except ContractViolation as e:
        raise DatasetFormatError(path, 1, str(e)) from e
    logger.info(f"Loaded {len(dataset)} trajectories from {path}")
    return dataset
