import logging
from pathlib import Path

import pandas as pd
from django.core.management.base import CommandError

from cli_harness.management.commands._base import PushLabCommand
from cli_harness.models import EvaluationRun
from cli_harness.utils.evaluation import CONTROL_COLUMNS
from cli_harness.utils.metrics import MetricsReport, metrics_frame
from cli_harness.utils.report import (
    CONTROL_CSV,
    CONTROL_JSON,
    METRICS_CSV,
    METRICS_JSON,
    plot_loss_curve,
    write_frame,
    write_json,
)
from dynamics_models.utils.checkpoints import load_model

logger = logging.getLogger(__name__)


class Command(PushLabCommand):
    help = 'Re-emit the tables of a recorded evaluation run, plus loss curves of its checkpoints.'
    command_name = 'report'

    def add_command_arguments(self, parser):
        parser.add_argument('--run', type=int, dest='run_id', help='EvaluationRun id (default: latest evaluation)')

    def run(self, run, **options):
        stored = self.stored_run(options.get('run_id'))
        header = {
            'config': stored.config,
            'config_hash': stored.config_hash,
            'checkpoints': stored.checkpoint_hashes,
            'datasets': stored.dataset_hashes,
        }
        written = []
        if 'metrics' in stored.metrics:
            reports = [MetricsReport.from_dict(m) for m in stored.metrics['metrics']]
            written.append(write_frame(run.out_dir / METRICS_CSV, metrics_frame(reports)))
            written.append(write_json(run.out_dir / METRICS_JSON, {**header, 'metrics': stored.metrics['metrics']}))
        if 'control' in stored.metrics:
            frame = pd.DataFrame(stored.metrics['control'], columns=CONTROL_COLUMNS)
            written.append(write_frame(run.out_dir / CONTROL_CSV, frame))
            written.append(write_json(run.out_dir / CONTROL_JSON, {**header, 'control': stored.metrics['control']}))

        for checkpoint in sorted(stored.checkpoint_hashes):
            if Path(checkpoint).exists():
                params = load_model(checkpoint)
                target = run.out_dir / f'loss_curve_{Path(checkpoint).stem}.svg'
                if params.metadata.get('loss_curve') or params.metadata.get('fine_tune_curve'):
                    written.append(plot_loss_curve(Path(checkpoint).stem, params.metadata, target))
            else:
                logger.warning(f"Checkpoint {checkpoint} no longer exists; loss curve skipped")
        return {'checkpoints': stored.checkpoint_hashes, 'datasets': stored.dataset_hashes, 'written': written}

    def stored_run(self, run_id):
        runs = EvaluationRun.objects.filter(command__in=['eval_pred', 'eval_control'])
        try:
            return runs.get(pk=run_id) if run_id is not None else runs.latest('created_at', 'id')
        except EvaluationRun.DoesNotExist:
            raise CommandError(f"No evaluation run {run_id if run_id is not None else 'recorded yet'}")
