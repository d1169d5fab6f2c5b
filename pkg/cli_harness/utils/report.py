"""
Report Files
============
Metrics and control tables as CSV and JSON, one overhead SVG per control
episode and loss curves per checkpoint. Every JSON file echoes the run
configuration and the hashes of the inputs it came from. Nothing written
here carries a timestamp, so a repeated run reproduces the same bytes.
"""

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from cli_harness.exceptions import ReportWriteError
from cli_harness.utils.metrics import metrics_frame

logger = logging.getLogger(__name__)

# fixed element ids in the SVG output
plt.rcParams['svg.hashsalt'] = 'pushlab'

METRICS_CSV = 'metrics.csv'
METRICS_JSON = 'metrics.json'
CONTROL_CSV = 'control.csv'
CONTROL_JSON = 'control.json'
EPISODE_DIR = 'episodes'


def _write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
    except OSError as e:
        raise ReportWriteError(path, e.strerror or str(e)) from e
    return path


def write_json(path, data):
    try:
        text = json.dumps(data, indent=2, sort_keys=True, allow_nan=False)
    except ValueError as e:
        raise ReportWriteError(path, f"not serializable: {e}") from e
    return _write_text(path, text + '\n')


def write_frame(path, frame):
    return _write_text(path, frame.to_csv(index=False, lineterminator='\n'))


def _save_figure(fig, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format='svg', metadata={'Date': None})
    except OSError as e:
        raise ReportWriteError(path, e.strerror or str(e)) from e
    finally:
        plt.close(fig)
    return path


def episode_filename(record):
    return f"episode_{record.index}_{record.difficulty}.svg"


def plot_episode(record, path):
    """Overhead view: start outlines dashed, end outlines solid, goal circle and the path of disk 2."""
    outcome = record.outcome
    trajectory = outcome.trajectory
    fig, ax = plt.subplots(figsize=(6, 6))

    for k, (start, end, radius) in enumerate(zip(trajectory.pose[0], trajectory.pose[-1], trajectory.radius)):
        color = 'tab:blue' if k == 0 else ('tab:orange' if k == 1 else 'tab:gray')
        ax.add_patch(Circle(start[:2], radius, fill=False, linestyle='--', color=color, alpha=0.6))
        ax.add_patch(Circle(end[:2], radius, fill=False, linestyle='-', color=color))

    goal = outcome.goal
    ax.add_patch(Circle(goal.position, goal.tolerance, fill=False, color='tab:green'))
    ax.plot(*goal.position, marker='x', color='tab:green')
    path_xy = outcome.target_path
    ax.plot(path_xy[:, 0], path_xy[:, 1], marker='.', color='tab:orange', linewidth=1)

    ax.set_aspect('equal')
    ax.autoscale_view()
    ax.margins(0.15)
    ax.set_xlabel('x (m)')
    ax.set_ylabel('y (m)')
    status = 'success' if outcome.success else 'failure'
    ax.set_title(f"Episode {record.index} ({record.difficulty}): {status} after {outcome.steps} pushes")
    return _save_figure(fig, path)


def plot_loss_curve(name, metadata, path):
    """Training and validation loss; a fine-tuning phase continues on the same axis."""
    curve = metadata.get('loss_curve') or []
    tuned = metadata.get('fine_tune_curve') or []
    offset = (curve[-1][0] + 1) if curve else 0

    fig, ax = plt.subplots(figsize=(7, 4))
    for label, points, shift in (('train', curve, 0), ('fine-tune', tuned, offset)):
        if not points:
            continue
        iterations = [p[0] + shift for p in points]
        ax.plot(iterations, [p[1] for p in points], label=f'{label} data loss')
        validation = [(i, p[2]) for i, p in zip(iterations, points) if p[2] is not None]
        if validation:
            ax.plot(*zip(*validation), linestyle='--', label=f'{label} validation')
    ax.set_yscale('log')
    ax.set_xlabel('iteration')
    ax.set_ylabel('loss (m^2)')
    ax.set_title(f'{name} loss')
    if curve or tuned:
        ax.legend()
    return _save_figure(fig, path)


def provenance(run, checkpoint_hashes=None, dataset_hashes=None):
    return {
        'config': run.to_dict(),
        'config_hash': run.config_hash(),
        'checkpoints': dict(checkpoint_hashes or {}),
        'datasets': dict(dataset_hashes or {}),
    }


def emit_report(out_dir, run, metrics=None, control=None, curves=None, checkpoint_hashes=None,
                dataset_hashes=None):
    """
    Write every artifact of a run into ``out_dir``.

    Args:
        run: RunConfig
        metrics: MetricsReports of a prediction evaluation
        control: ControlReport of a control evaluation
        curves: {model name: checkpoint metadata} for loss-curve plots

    Returns:
        list of Path: files written, in a fixed order

    Raises:
        ReportWriteError: a file could not be written
    """
    out_dir = Path(out_dir)
    header = provenance(run, checkpoint_hashes, dataset_hashes)
    written = []

    if metrics:
        written.append(write_frame(out_dir / METRICS_CSV, metrics_frame(metrics)))
        written.append(write_json(out_dir / METRICS_JSON, {**header, 'metrics': [m.to_dict() for m in metrics]}))

    if control is not None:
        written.append(write_frame(out_dir / CONTROL_CSV, control.to_frame()))
        written.append(write_json(out_dir / CONTROL_JSON, {**header, 'control': control.to_dict()}))
        for record in control.episodes:
            written.append(plot_episode(record, out_dir / EPISODE_DIR / episode_filename(record)))

    for name, metadata in sorted((curves or {}).items()):
        if metadata.get('loss_curve') or metadata.get('fine_tune_curve'):
            written.append(plot_loss_curve(name, metadata, out_dir / f'loss_curve_{name}.svg'))

    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written
