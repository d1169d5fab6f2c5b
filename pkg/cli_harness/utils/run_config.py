"""
Run Configuration
=================
A run is described by one JSON document whose sections are deep-merged
over ``settings.PUSHLAB``. Section names are matched case-insensitively
("train" overrides ``PUSHLAB['TRAIN']``); anything unknown is rejected so a
typo never silently falls back to a default. Units are fixed: m, rad, s, kg.

Example:
    {
        "seed": 3,
        "train": {"iterations": 5000},
        "datasets": {"train": "runs/direct_force_train.jsonl"},
        "models": {"SAIN": "runs/sain.ckpt"}
    }
"""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings

from cli_harness.exceptions import ConfigurationError
from dynamics_models.utils.nominal import NominalEngine
from neural.utils.schedule import TrainConfig
from planner.utils.search import PlannerConfig
from scenario.utils.specs import PushSpec, SceneSpec, SurrogateRealSpec
from sim_core.utils.state import SimConfig

logger = logging.getLogger(__name__)

SECTIONS = ('SIM', 'TRAIN', 'PLANNER', 'NOMINAL', 'SCENARIO', 'SURROGATE', 'CONTROL')
SCALARS = ('SEED', 'THREADS', 'OUTPUT_DIR')
REFERENCES = ('DATASETS', 'MODELS')

# flat SCENARIO keys split over SceneSpec, PushSpec (renamed) and generation options
SCENE_KEYS = ('n_disks', 'mu_range', 'mass_range', 'radius_range', 'placement_range')
PUSH_KEYS = {
    'pusher_angle_range': 'pusher_angle_range',
    'push_direction_range': 'push_direction_range',
    'push_duration': 'duration',
    'push_distance': 'distance',
}
GENERATION_KEYS = ('shadow_window', 'sigma_pos', 'sigma_rot')
CONTROL_KEYS = ('masses', 'radii', 'mu', 'n_easy', 'n_hard')


def deep_merge(base, override, path=''):
    """Override values into a copy of ``base``; nested dicts merge, keys must already exist."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if key not in merged:
            raise ConfigurationError(f"Unknown configuration key '{path}{key}'")
        if isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = deep_merge(merged[key], value, f"{path}{key}.")
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def canonical_json(data):
    return json.dumps(data, sort_keys=True, separators=(',', ':'), allow_nan=False)


@dataclass
class RunConfig:
    command: str
    seed: int
    threads: int
    out_dir: Path
    sections: dict
    datasets: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'command': self.command,
            'seed': self.seed,
            'threads': self.threads,
            'out_dir': str(self.out_dir),
            'sections': self.sections,
            'datasets': self.datasets,
            'models': self.models,
            'options': self.options,
            'units': {'length': 'm', 'angle': 'rad', 'time': 's', 'mass': 'kg'},
        }

    def config_hash(self):
        return hashlib.sha256(canonical_json(self.to_dict()).encode('utf-8')).hexdigest()

    def _build(self, cls, data, section):
        try:
            return cls.from_dict(data)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Section {section.lower()}: {e}") from e

    def sim(self) -> SimConfig:
        return self._build(SimConfig, self.sections['SIM'], 'SIM')

    def train_config(self) -> TrainConfig:
        return self._build(TrainConfig, {**self.sections['TRAIN'], 'seed': self.seed}, 'TRAIN')

    def planner_config(self) -> PlannerConfig:
        return self._build(PlannerConfig, self.sections['PLANNER'], 'PLANNER')

    def nominal(self) -> NominalEngine:
        try:
            return NominalEngine.from_dict(self.sections['NOMINAL'], sim=self.sim())
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Section nominal: {e}") from e

    def scene_spec(self, n_disks=None) -> SceneSpec:
        scenario = self.sections['SCENARIO']
        data = {key: scenario[key] for key in SCENE_KEYS if key in scenario}
        if n_disks is not None:
            data['n_disks'] = n_disks
        return self._build(SceneSpec, data, 'SCENARIO')

    def push_spec(self, setup) -> PushSpec:
        scenario = self.sections['SCENARIO']
        data = {target: scenario[key] for key, target in PUSH_KEYS.items() if key in scenario}
        return self._build(PushSpec, {**data, 'setup': setup}, 'SCENARIO')

    def generation(self):
        """Shadow window and matched-world noise levels."""
        scenario = self.sections['SCENARIO']
        return {key: scenario[key] for key in GENERATION_KEYS if key in scenario}

    def surrogate_spec(self) -> SurrogateRealSpec:
        return self._build(SurrogateRealSpec, self.sections['SURROGATE'], 'SURROGATE')

    def control(self):
        return dict(self.sections['CONTROL'])

    def resolve(self, reference, kind):
        """
        A dataset or checkpoint named in the config, or a literal path.

        Raises:
            ConfigurationError: the file does not exist
        """
        mapping = self.datasets if kind == 'dataset' else self.models
        path = Path(mapping.get(reference, reference))
        if not path.exists():
            raise ConfigurationError(f"{kind.capitalize()} '{reference}' not found at {path}")
        return path


def _check_sections(document):
    known = SECTIONS + SCALARS + REFERENCES
    normalized = {}
    for key, value in document.items():
        name = key.upper()
        if name not in known:
            raise ConfigurationError(f"Unknown configuration section '{key}'. Allowed: {[k.lower() for k in known]}")
        normalized[name] = value
    return normalized


def _section_keys(sections):
    """Every SCENARIO and CONTROL key must be one the split below understands."""
    understood = set(SCENE_KEYS) | set(PUSH_KEYS) | set(GENERATION_KEYS)
    unknown = set(sections['SCENARIO']) - understood
    unknown |= set(sections['CONTROL']) - set(CONTROL_KEYS)
    if unknown:
        raise ConfigurationError(f"Unknown scenario/control keys: {sorted(unknown)}")


def load_run_config(command, config_path=None, seed=None, out_dir=None, threads=None, options=None):
    """
    Resolve the configuration of one command.

    Command-line flags win over the document, which wins over settings.

    Raises:
        ConfigurationError: unreadable document, unknown keys, or a referenced
            file that does not exist
    """
    document = {}
    if config_path:
        path = Path(config_path)
        try:
            document = json.loads(path.read_text(encoding='utf-8'))
        except (OSError, ValueError) as e:
            raise ConfigurationError(f"Cannot read configuration {path}: {e}") from e
        if not isinstance(document, dict):
            raise ConfigurationError(f"Configuration {path} must be a JSON object")
    document = _check_sections(document)

    defaults = settings.PUSHLAB
    sections = deep_merge(
        {name: defaults[name] for name in SECTIONS},
        {name: document[name] for name in SECTIONS if name in document},
    )
    _section_keys(sections)

    run = RunConfig(
        command=command,
        seed=int(seed if seed is not None else document.get('SEED', sections['TRAIN'].get('seed', 0))),
        threads=int(threads if threads is not None else document.get('THREADS', defaults['THREADS'])),
        out_dir=Path(out_dir or document.get('OUTPUT_DIR', defaults['OUTPUT_DIR'])),
        sections=sections,
        datasets=dict(document.get('DATASETS', {})),
        models=dict(document.get('MODELS', {})),
        options=dict(options or {}),
    )
    if run.seed < 0:
        raise ConfigurationError(f"Seed must be non-negative, got {run.seed}")
    if run.threads < 1:
        raise ConfigurationError(f"Threads must be at least 1, got {run.threads}")

    # surface invalid values before any work starts
    run.sim()
    run.train_config()
    run.planner_config()
    run.nominal()
    run.scene_spec()
    run.surrogate_spec()
    logger.debug(f"Resolved {command} configuration {run.config_hash()[:12]}")
    return run
