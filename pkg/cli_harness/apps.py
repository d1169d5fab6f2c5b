from django.apps import AppConfig


class CliHarnessConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'cli_harness'
    verbose_name = 'Experiment Harness'
