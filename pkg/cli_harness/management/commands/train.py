import logging

from cli_harness.management.commands._base import PushLabCommand
from cli_harness.utils.report import emit_report
from dynamics_models.exceptions import TrainingDiverged
from dynamics_models.utils.checkpoints import save_model
from dynamics_models.utils.features import MODEL_KINDS
from dynamics_models.utils.training import train
from neural.utils.checkpoint import file_sha256
from scenario.utils.dataset_io import load_dataset

logger = logging.getLogger(__name__)


class Command(PushLabCommand):
    help = 'Train an IN or SAIN model on a dataset and save the checkpoint.'
    command_name = 'train'
    allows_threads = False

    def add_command_arguments(self, parser):
        parser.add_argument('--kind', choices=MODEL_KINDS, required=True)
        parser.add_argument('--data', required=True, help='Dataset name from the configuration, or a path')
        parser.add_argument('--name', help='Checkpoint file stem (default: the model kind)')

    def run(self, run, **options):
        data_path = run.resolve(options['data'], 'dataset')
        dataset = load_dataset(data_path)
        kind = options['kind']
        path = run.out_dir / f"{options.get('name') or kind}.ckpt"
        try:
            params = train(kind, dataset, run.train_config(), nominal=run.nominal())
        except TrainingDiverged as e:
            salvage = path.with_name(f'{path.stem}_diverged.ckpt')
            save_model(salvage, e.checkpoint)
            logger.warning(f"Last good parameters saved to {salvage}")
            raise
        digest = save_model(path, params)
        written = [path] + emit_report(run.out_dir, run, curves={path.stem: params.metadata})
        return {
            'checkpoints': {str(path): digest},
            'datasets': {str(data_path): file_sha256(data_path)},
            'written': written,
        }
