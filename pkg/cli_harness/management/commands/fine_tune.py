from cli_harness.management.commands._base import PushLabCommand
from cli_harness.utils.report import emit_report
from dynamics_models.utils.checkpoints import load_model, save_model
from dynamics_models.utils.training import fine_tune
from neural.utils.checkpoint import file_sha256
from scenario.utils.dataset_io import load_dataset


class Command(PushLabCommand):
    help = 'Fine-tune a trained checkpoint on target-domain data.'
    command_name = 'fine_tune'
    allows_threads = False

    def add_command_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Checkpoint name from the configuration, or a path')
        parser.add_argument('--data', required=True, help='Target dataset name from the configuration, or a path')
        parser.add_argument('--name', help='Output checkpoint stem (default: <input>_finetuned)')

    def run(self, run, **options):
        model_path = run.resolve(options['model'], 'model')
        data_path = run.resolve(options['data'], 'dataset')
        params = load_model(model_path)
        tuned = fine_tune(params, load_dataset(data_path), run.train_config(), nominal=run.nominal())

        path = run.out_dir / f"{options.get('name') or model_path.stem + '_finetuned'}.ckpt"
        digest = save_model(path, tuned)
        written = [path] + emit_report(run.out_dir, run, curves={path.stem: tuned.metadata})
        return {
            'checkpoints': {str(model_path): file_sha256(model_path), str(path): digest},
            'datasets': {str(data_path): file_sha256(data_path)},
            'written': written,
        }
