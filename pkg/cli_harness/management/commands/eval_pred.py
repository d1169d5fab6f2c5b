from cli_harness.management.commands._base import PushLabCommand
from cli_harness.utils.evaluation import DEFAULT_HORIZON, eval_prediction, load_forward_model
from cli_harness.utils.report import emit_report
from dynamics_models.utils.rollout import PHYSICS
from neural.utils.checkpoint import file_sha256
from scenario.utils.dataset_io import load_dataset


class Command(PushLabCommand):
    help = 'Forward-prediction errors of the physics baseline and trained checkpoints on a test set.'
    command_name = 'eval_pred'

    def add_command_arguments(self, parser):
        parser.add_argument('--data', required=True, help='Test dataset name from the configuration, or a path')
        parser.add_argument('--models', nargs='*',
                            help='Checkpoint names or paths (default: every model in the configuration)')
        parser.add_argument('--horizon', type=int, default=DEFAULT_HORIZON)

    def run(self, run, **options):
        data_path = run.resolve(options['data'], 'dataset')
        references = options.get('models')
        if references is None:
            references = sorted(run.models)
        paths = [run.resolve(ref, 'model') for ref in references]
        dataset = load_dataset(data_path)
        nominal = run.nominal()

        reports, curves, checkpoints = [], {}, {}
        for path in [PHYSICS] + paths:
            model, label, metadata = load_forward_model(path, nominal)
            reports.append(eval_prediction(
                model, dataset, options['horizon'], threads=run.threads, name=label, dataset_name=data_path.name,
            ))
            if metadata is not None:
                curves[label] = metadata
                checkpoints[str(path)] = file_sha256(path)

        datasets = {str(data_path): file_sha256(data_path)}
        written = emit_report(
            run.out_dir, run, metrics=reports, curves=curves, checkpoint_hashes=checkpoints, dataset_hashes=datasets,
        )
        return {
            'checkpoints': checkpoints,
            'datasets': datasets,
            'metrics': {'metrics': [r.to_dict() for r in reports]},
            'written': written,
        }
