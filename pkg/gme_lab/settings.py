"""
Django settings for the gme_lab project.

The project hosts the GME solver library (``gme``) and its experiment harness
(the ``experiments`` app, driven through management commands). There are no
web views and no database tables; Django supplies configuration, logging,
the command-line front end and the test runner.

Environment variables (optionally from a ``.env`` file next to manage.py):
    GME_LOG_LEVEL        log level for the gme and experiments loggers
    GME_WORKERS          default worker threads for experiment runs
    GME_SOLVER_MAX_ITER  default iteration cap of the solver
"""

from pathlib import Path
import os

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'gme-lab-local-only')

DEBUG = os.getenv('DJANGO_DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'experiments',
]

MIDDLEWARE = []

# The harness stores nothing; SQLite keeps the test runner and checks happy.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Solver defaults (see gme.config.NumericDefaults for the full list of keys)
GME = {}

if os.getenv('GME_SOLVER_MAX_ITER'):
    GME['SOLVER_MAX_ITER'] = int(os.getenv('GME_SOLVER_MAX_ITER'))

_WORKERS = int(os.getenv('GME_WORKERS', '1'))

# Per-scenario defaults for the experiment commands (keys of ScenarioConfig)
GME_EXPERIMENTS = {
    'POISSON': {
        'N': 150,
        'TRIALS': 100,
        'TOL': 1e-6,
        'WORKERS': _WORKERS,
    },
    'DECLIP': {
        'N': 256,
        'TRIALS': 50,
        'TOL': 1e-4,
        'WORKERS': _WORKERS,
    },
}

if os.getenv('GME_SOLVER_MAX_ITER'):
    for _scenario in GME_EXPERIMENTS.values():
        _scenario['MAX_ITER'] = int(os.getenv('GME_SOLVER_MAX_ITER'))


LOG_LEVEL = os.getenv('GME_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'gme': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
        },
        'experiments': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
        },
    },
}
