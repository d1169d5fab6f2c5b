import logging

from django.core.management.base import BaseCommand, CommandError

from cli_harness.models import EvaluationRun
from cli_harness.utils.run_config import load_run_config
from sim_core.exceptions import PushLabError

logger = logging.getLogger(__name__)


class PushLabCommand(BaseCommand):
    """
    Shared flags and error handling of the harness commands.

    Subclasses add their own arguments in ``add_command_arguments`` and do
    the work in ``run``, which returns the provenance to record.
    """
    command_name = None
    allows_threads = True

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON run configuration merged over settings.PUSHLAB')
        parser.add_argument('--seed', type=int, help='Run seed (overrides the configuration)')
        parser.add_argument('--out', help='Output directory (overrides the configuration)')
        parser.add_argument('--threads', type=int, help='Worker threads for generation and evaluation')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def command_options(self, options):
        """The command-specific options echoed into the run configuration."""
        common = {'config', 'seed', 'out', 'threads', 'verbosity', 'settings', 'pythonpath', 'traceback',
                  'no_color', 'force_color', 'skip_checks', 'stdout', 'stderr'}
        return {k: v for k, v in sorted(options.items()) if k not in common}

    def handle(self, *args, **options):
        if not self.allows_threads and options.get('threads') not in (None, 1):
            raise CommandError(f"{self.command_name} runs single-threaded; --threads must be 1")
        try:
            run = load_run_config(
                self.command_name,
                config_path=options.get('config'),
                seed=options.get('seed'),
                out_dir=options.get('out'),
                threads=1 if not self.allows_threads else options.get('threads'),
                options=self.command_options(options),
            )
            result = self.run(run, **options)
        except PushLabError as e:
            raise CommandError(str(e)) from e

        EvaluationRun.objects.create(
            command=self.command_name,
            config=run.to_dict(),
            config_hash=run.config_hash(),
            checkpoint_hashes=result.get('checkpoints', {}),
            dataset_hashes=result.get('datasets', {}),
            metrics=result.get('metrics', {}),
        )
        for path in result.get('written', []):
            self.stdout.write(str(path))

    def run(self, run, **options):
        raise NotImplementedError
