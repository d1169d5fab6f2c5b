"""
Django settings for PDLproject project (planar dynamics laboratory).

The project has no web surface: Django provides the settings layer, the
management commands that make up the command line, the ORM that records
evaluation provenance, and the test runner.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

import os
from pathlib import Path
try:
    from dotenv import load_dotenv
except ModuleNotFoundError:
    load_dotenv = lambda *args, **kwargs: None

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from the project's .env file if present
load_dotenv(BASE_DIR / 'PDLproject' / '.env')


# Only used to satisfy Django's startup checks; nothing is signed.
SECRET_KEY = os.environ.get('PUSHLAB_SECRET_KEY', 'pushlab-local-only-not-a-secret')

DEBUG = os.environ.get('PUSHLAB_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'sim_core',
    'neural',
    'dynamics_models',
    'scenario',
    'planner',
    'cli_harness',
]


# Database
# https://docs.djangoproject.com/en/5.1/ref/settings/#databases

# Evaluation provenance only; sqlite keeps runs self-contained.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('PUSHLAB_DB_PATH', BASE_DIR / 'db.sqlite3'),
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.1/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# Default primary key field type
# https://docs.djangoproject.com/en/5.1/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
LOG_LEVEL = os.environ.get('PUSHLAB_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False}
        for app in ['sim_core', 'neural', 'dynamics_models', 'scenario', 'planner', 'cli_harness']
    },
}


# Laboratory defaults. A run's JSON config is deep-merged over this dict
# (see cli_harness.utils.run_config); units are always m, rad, s, kg.
PUSHLAB = {
    'OUTPUT_DIR': os.environ.get('PUSHLAB_OUTPUT_DIR', str(BASE_DIR / 'runs')),
    'THREADS': int(os.environ.get('PUSHLAB_THREADS', '1')),
    'SIM': {
        'dt': 1.0 / 240.0,
        'restitution': 0.0,
        'contact_mu': 0.3,
        'penetration_tolerance': 1e-4,
        'baumgarte_beta': 0.2,
        'solver_iterations': 10,
    },
    'TRAIN': {
        'lr0': 1e-3,
        'decay_factor': 0.5,
        'decay_every': 2500,
        'iterations': 10000,
        'batch_size': 100,
        'l2_lambda': 1e-3,
        'rollout_length': 200,
        'seed': 0,
        'error_weight': 1e6,
        'clip_norm': 5.0,
        'log_every': 100,
        'validation_fraction': 0.1,
        'fine_tune_lr_scale': 0.1,
        'fine_tune_iterations': 2500,
    },
    'PLANNER': {
        'horizon_near': 3,
        'horizon_far': 2,
        'switch_distance': 0.010,
        'max_episode_actions': 60,
        'queue_capacity': 4096,
        'settle_steps': 24,
    },
    # Nominal engine embedded in SAIN (real-world disk estimates).
    'NOMINAL': {
        'masses': [0.896, 1.1],
        'radii': [0.0525, 0.058],
        'mu': 0.15,
        'use_observed_radii': True,
    },
    'SCENARIO': {
        'n_disks': 2,
        'mu_range': [0.05, 0.25],
        'mass_range': [0.85, 1.15],
        'radius_range': [0.05, 0.06],
        'placement_range': [-1.0471975511965976, 1.0471975511965976],
        'pusher_angle_range': [-1.0471975511965976, 1.0471975511965976],
        'push_direction_range': [-0.5235987755982988, 0.5235987755982988],
        'push_duration': 2.0,
        'push_distance': 0.010,
        'shadow_window': 200,
        'sigma_pos': 0.0,
        'sigma_rot': 0.0,
    },
    'SURROGATE': {
        'mu_mean': 0.15,
        'mu_amplitude': 0.05,
        'correlation_length': 0.1,
        'contact_mu_scale': 1.3,
        'sigma_pos': 0.0005,
        'sigma_rot': 0.005,
        'field_extent': 0.8,
        'field_spacing': 0.01,
        'n_modes': 64,
        'field_seed': None,
    },
    # Fixed control-evaluation disks, deliberately off the nominal values.
    'CONTROL': {
        'masses': [0.9, 1.0],
        'radii': [0.054, 0.059],
        'mu': 0.15,
        'n_easy': 25,
        'n_hard': 25,
    },
}
