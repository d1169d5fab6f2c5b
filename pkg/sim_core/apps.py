from django.apps import AppConfig


class SimCoreConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'sim_core'
    verbose_name = 'Analytical Disk Engine'
