"""
Run configuration files: one ``key = value`` pair per line, ``#`` comments.
"""
import logging
import os

from cadsdf.api import config
from cadsdf.api.common import ConfigError
from cadsdf.api.losses import LossWeights
from cadsdf.api.optimizer import TrainConfig


logger = logging.getLogger(__name__)

OUTPUT_DIR = 'cadsdf-out'
FIXTURE_COUNT = 10000
HIDDEN_LAYERS = len(config.LAYER_SIZES) - 2
HIDDEN_WIDTH = config.LAYER_SIZES[1]

_TRUE = ('true', 'yes', 'on', '1')
_FALSE = ('false', 'no', 'off', '0')


def parse_bool(value):
    # type: (str) -> bool
    lowered = value.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError('expected a boolean, got {!r}'.format(value))


def _optional(value):
    return value or None


TRAIN_KEYS = {
    'iterations': int,
    'learning_rate': float,
    'adam_beta1': float,
    'adam_beta2': float,
    'adam_eps': float,
    'batch_manifold': int,
    'batch_uniform': int,
    'batch_omega': int,
    'knn_k': int,
    'annealing_mode': str,
    'dynamic_sampling': parse_bool,
    'seed': int,
    'deterministic': parse_bool,
    'checkpoint_every': int,
    'omega0': float,
    'log_every': int,
    'curvature_chunk': int,
}
WEIGHT_KEYS = {
    'lambda_e': float,
    'lambda_dm': float,
    'lambda_dnm': float,
    'lambda_gauss': float,
    'alpha': float,
    'dt_a': float,
    'regularizer': str,
}
RUN_KEYS = {
    'hidden_layers': int,
    'hidden_width': int,
    'input': _optional,
    'fixture': _optional,
    'fixture_count': int,
    'fixture_noise': float,
    'fixture_missing': float,
    'output_dir': str,
    'mesh_resolution': int,
    'metric_samples': int,
    'f1_threshold': float,
    'resume': _optional,
}
PATH_KEYS = ('input', 'output_dir', 'resume')

DEFAULTS = {
    'hidden_layers': HIDDEN_LAYERS,
    'hidden_width': HIDDEN_WIDTH,
    'input': None,
    'fixture': None,
    'fixture_count': FIXTURE_COUNT,
    'fixture_noise': 0.0,
    'fixture_missing': 0.0,
    'output_dir': OUTPUT_DIR,
    'mesh_resolution': config.GRID_RESOLUTION,
    'metric_samples': config.METRIC_SAMPLES,
    'f1_threshold': config.F1_THRESHOLD,
    'resume': None,
}


class RunConfig(object):
    """
    Everything one ``fit`` run needs: the training configuration, where the
    points come from and where results go.
    """

    def __init__(self, values=None, source=None):
        # type: (dict, str) -> None
        self.source = source
        self.values = dict(DEFAULTS)
        for key, value in (values or {}).items():
            if key not in TRAIN_KEYS and key not in WEIGHT_KEYS and key not in RUN_KEYS:
                raise ConfigError('unknown key {!r}'.format(key))
            self.values[key] = value
        self.train_config = self._build_train_config()
        self.validate()

    def __repr__(self):
        return '<{} source={} {}>'.format(self.__class__.__name__, self.source,
                                          self.train_config)

    def __getattr__(self, name):
        values = self.__dict__.get('values', {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    @property
    def layer_sizes(self):
        return [3] + [self.values['hidden_width']] * self.values['hidden_layers'] + [1]

    def _build_train_config(self):
        if self.values['hidden_layers'] < 1 or self.values['hidden_width'] < 2:
            raise ConfigError('need hidden_layers >= 1 and hidden_width >= 2')
        weights = LossWeights(**{k: v for k, v in self.values.items() if k in WEIGHT_KEYS})
        train = {k: v for k, v in self.values.items() if k in TRAIN_KEYS}
        return TrainConfig(weights=weights, layer_sizes=self.layer_sizes, **train)

    def validate(self):
        v = self.values
        if v['fixture'] is not None and v['fixture'] not in config.FIXTURE_KINDS:
            raise ConfigError('unknown fixture {!r}, expected one of {}'.format(
                v['fixture'], ', '.join(config.FIXTURE_KINDS)))
        if not config.MIN_RESOLUTION <= v['mesh_resolution'] <= config.MAX_RESOLUTION:
            raise ConfigError('mesh_resolution must lie in [{}, {}], got {}'.format(
                config.MIN_RESOLUTION, config.MAX_RESOLUTION, v['mesh_resolution']))
        if v['fixture_count'] < 1 or v['metric_samples'] < 1:
            raise ConfigError('fixture_count and metric_samples must be >= 1')
        if not v['f1_threshold'] > 0:
            raise ConfigError('f1_threshold must be > 0, got {}'.format(v['f1_threshold']))
        if not v['fixture_noise'] >= 0:
            raise ConfigError('fixture_noise must be >= 0, got {}'.format(v['fixture_noise']))
        if not 0 <= v['fixture_missing'] < 1:
            raise ConfigError('fixture_missing must lie in [0, 1), got {}'.format(
                v['fixture_missing']))

    def check_inputs(self):
        """
        Path checks that only matter before training: exactly one point
        source, and every file to read exists.
        """
        v = self.values
        if (v['input'] is None) == (v['fixture'] is None):
            raise ConfigError('set exactly one of input and fixture')
        for key in ('input', 'resume'):
            if v[key] is not None and not os.path.isfile(v[key]):
                raise ConfigError('{} file not found: {}'.format(key, v[key]))

    def dumps(self):
        # type: () -> str
        lines = []
        for key in sorted(set(TRAIN_KEYS) | set(WEIGHT_KEYS) | set(RUN_KEYS)):
            value = self._value(key)
            if value is not None:
                lines.append('{} = {}'.format(key, value))
        return '\n'.join(lines) + '\n'

    def _value(self, key):
        if key in self.values:
            return self.values[key]
        if key in WEIGHT_KEYS:
            return getattr(self.train_config.weights, key)
        return getattr(self.train_config, key)


def parse_config(text, source=None):
    # type: (str, str) -> RunConfig
    """
    Parse ``key = value`` lines. Relative paths are taken relative to the
    directory of ``source``.
    """
    base = os.path.dirname(os.path.abspath(source)) if source else None
    where = source or '<string>'
    values = {}
    converters = dict(TRAIN_KEYS, **WEIGHT_KEYS)
    converters.update(RUN_KEYS)
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError('{}:{}: expected "key = value"'.format(where, number))
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in converters:
            raise ConfigError('{}:{}: unknown key {!r}'.format(where, number, key))
        if key in values:
            raise ConfigError('{}:{}: {!r} given twice'.format(where, number, key))
        try:
            values[key] = converters[key](value)
        except ValueError as e:
            raise ConfigError('{}:{}: bad value for {}: {}'.format(where, number, key, e))
        if key in PATH_KEYS and values[key] and base and not os.path.isabs(values[key]):
            values[key] = os.path.join(base, values[key])
    return RunConfig(values, source)


def load_config(path):
    # type: (str) -> RunConfig
    if not os.path.isfile(path):
        raise ConfigError('config file not found: {}'.format(path))
    with open(path) as stream:
        run_config = parse_config(stream.read(), path)
    logger.debug('loaded %r', run_config)
    return run_config
