from django.apps import AppConfig


class PlannerAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'planner'
    verbose_name = 'Receding-Horizon Push Planner'
