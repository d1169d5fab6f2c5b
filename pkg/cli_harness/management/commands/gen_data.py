from django.core.management.base import CommandError

from cli_harness.management.commands._base import PushLabCommand
from scenario.utils.dataset_io import save_dataset
from scenario.utils.generation import generate_dataset, surface_shift
from scenario.utils.specs import MATCHED, POSITION_CONTROL, SETUPS, SURROGATE, WORLDS


class Command(PushLabCommand):
    help = 'Generate a dataset of straight pushes and write it as JSON Lines.'
    command_name = 'gen_data'

    def add_command_arguments(self, parser):
        parser.add_argument('--n', type=int, required=True, help='Number of trajectories')
        parser.add_argument('--setup', choices=SETUPS, default=POSITION_CONTROL)
        parser.add_argument('--world', choices=WORLDS, default=MATCHED)
        parser.add_argument('--n-disks', type=int, choices=[2, 3], dest='n_disks')
        parser.add_argument('--surface-shift', action='store_true', dest='surface_shift',
                            help='Surrogate world on the shifted surface (new field, mean friction 0.2)')
        parser.add_argument('--name', help='Dataset file stem (default: setup, world and disk count)')

    def run(self, run, **options):
        scene = run.scene_spec(options.get('n_disks'))
        setup = options['setup']
        surrogate = None
        if options['world'] == SURROGATE:
            surrogate = run.surrogate_spec()
            if options.get('surface_shift'):
                surrogate = surface_shift(surrogate, seed=run.seed)
        elif options.get('surface_shift'):
            raise CommandError('--surface-shift only applies to the surrogate world')

        generation = run.generation()
        dataset = generate_dataset(
            options['n'], setup,
            scene=scene,
            seed=run.seed,
            push=run.push_spec(setup),
            sim=run.sim(),
            nominal=run.nominal(),
            surrogate=surrogate,
            shadow_window=generation.get('shadow_window', 200),
            sigma_pos=generation.get('sigma_pos', 0.0),
            sigma_rot=generation.get('sigma_rot', 0.0),
            threads=run.threads,
        )
        name = options.get('name') or f"{setup}_{options['world']}_{scene.n_disks}disk"
        path = run.out_dir / f'{name}.jsonl'
        digest = save_dataset(dataset, path)
        return {'datasets': {str(path): digest}, 'written': [path]}
