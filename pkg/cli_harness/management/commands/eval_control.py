from cli_harness.management.commands._base import PushLabCommand
from cli_harness.utils.evaluation import control_setup, eval_control, load_forward_model
from cli_harness.utils.report import emit_report
from dynamics_models.utils.rollout import PHYSICS
from neural.utils.checkpoint import file_sha256
from scenario.utils.specs import MATCHED, WORLDS


class Command(PushLabCommand):
    help = 'Closed-loop pushing success on easy and hard goals with one planning model.'
    command_name = 'eval_control'

    def add_command_arguments(self, parser):
        parser.add_argument('--model', default=PHYSICS,
                            help="Checkpoint name or path; 'physics' plans with the nominal engine")
        parser.add_argument('--world', choices=WORLDS, default=MATCHED)
        parser.add_argument('--swap-disks', action='store_true', dest='swap_disks',
                            help='Exchange the roles of the two control disks')
        parser.add_argument('--surface-shift', action='store_true', dest='surface_shift',
                            help='Surrogate world on the shifted surface')
        parser.add_argument('--n-easy', type=int, dest='n_easy')
        parser.add_argument('--n-hard', type=int, dest='n_hard')

    def run(self, run, **options):
        reference = options['model']
        path = reference if reference == PHYSICS else run.resolve(reference, 'model')
        model, label, metadata = load_forward_model(path, run.nominal())

        control = run.control()
        setup = control_setup(
            control, run.sim(), world=options['world'], surrogate=run.surrogate_spec(), seed=run.seed,
            swap=options['swap_disks'], shifted=options['surface_shift'],
        )
        variant = '+'.join(name for name, on in (('swap_disks', options['swap_disks']),
                                                 ('surface_shift', options['surface_shift'])) if on)
        report = eval_control(
            model, setup, run.planner_config(),
            n_easy=options['n_easy'] if options['n_easy'] is not None else control['n_easy'],
            n_hard=options['n_hard'] if options['n_hard'] is not None else control['n_hard'],
            seed=run.seed, threads=run.threads, name=label, world=options['world'], variant=variant,
        )

        checkpoints = {} if metadata is None else {str(path): file_sha256(path)}
        written = emit_report(
            run.out_dir, run, control=report, curves={label: metadata} if metadata else None,
            checkpoint_hashes=checkpoints,
        )
        return {
            'checkpoints': checkpoints,
            'metrics': {'control': report.to_frame().to_dict(orient='records')},
            'written': written,
        }
