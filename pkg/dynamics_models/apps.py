from django.apps import AppConfig


class DynamicsModelsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'dynamics_models'
    verbose_name = 'Forward Dynamics Models'
