# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers

Experiment configuration. A configuration is a tree of dataclasses written as
flat ``section.key = value`` lines; ``#`` starts a comment. Values are parsed
with the type of the corresponding field and unknown keys are errors.
"""

import hashlib

from dataclasses import dataclass, field, fields, replace

from ..exceptions import ConfigError

HOURS_PER_DAY = 24


@dataclass
class PhysicsConfig:
    """Ground-truth constants of the two-layer model (SI units)."""
    beta: float = 1.5e-11
    rek: float = 5.787e-7
    rd: float = 1.5e4
    delta: float = 0.25
    U1: float = 2.5e-2
    U2: float = 0.
    domain_length: float = 1e6
    dt: float = 3600.
    effective_beta: bool = True

    def validate(self):
        if not (self.delta > 0 and self.rd > 0 and self.dt > 0 and
                self.domain_length > 0):
            raise ConfigError('physics: delta, rd, dt and domain_length must '
                              'be positive.')


@dataclass
class DataConfig:
    """Truth simulations and their coarse-grained trajectories."""
    nx_hi: int = 64
    nx_lo: int = 16
    spin_up_years: float = 0.5
    duration_years: float = 1.5
    days_per_year: int = 360
    k: int = 24
    n_obs: int = 20
    n_train_sims: int = 6
    n_test_sims: int = 2
    ic_amplitude: float = 1e-7
    filter_fraction: float = 0.65
    n_workers: int = 1
    seed: int = 0

    def validate(self):
        if self.nx_hi % 2 or self.nx_lo % 2 or \
                not 0 < self.nx_lo <= self.nx_hi:
            raise ConfigError('data: grids must be even with nx_lo <= nx_hi, '
                              'got {} and {}.'.format(self.nx_lo, self.nx_hi))
        if not 0 <= self.spin_up_years < self.duration_years:
            raise ConfigError('data: spin-up ({} years) must be shorter than '
                              'the duration ({} years).'.format(
                                  self.spin_up_years, self.duration_years))
        if self.k < 1 or self.n_obs < 1:
            raise ConfigError('data: k and n_obs must be at least 1.')
        if self.n_train_sims < 0 or self.n_test_sims < 0 or self.n_workers < 1:
            raise ConfigError('data: simulation and worker counts must be '
                              'non-negative (one worker at least).')

    def n_steps(self, years, dt):
        return int(round(years * self.days_per_year * HOURS_PER_DAY * 3600. /
                         dt))


@dataclass
class TrainConfig:
    """Online training of the physical parameters and of the closure."""
    n_obs: int = 20
    k: int = 24
    batch_size: int = 4
    epochs: int = 100
    phase_switch: int = 50
    val_share: float = 0.1
    init_delta: float = 0.01
    init_U1: float = 0.001
    closure: str = 'cnn'
    phy_lr_start: float = 1e-2
    phy_lr_floor: float = 1e-3
    phy_lr_decay: float = 0.9
    nn_lr_start: float = 5e-4
    nn_lr_floor: float = 1e-4
    nn_lr_decay: float = 0.95
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    scale_loss: bool = True
    max_blowups: int = 5
    seed: int = 0

    def validate(self):
        if self.n_obs < 1 or self.k < 1:
            raise ConfigError('train: n_obs and k must be at least 1.')
        if not 0 <= self.phase_switch <= self.epochs:
            raise ConfigError('train: the phase switch ({}) must lie within '
                              'the {} epochs.'.format(self.phase_switch,
                                                      self.epochs))
        if self.batch_size < 1 or not 0 <= self.val_share < 1:
            raise ConfigError('train: batch_size >= 1 and 0 <= val_share < 1 '
                              'are required.')
        if self.closure not in ('cnn', 'none'):
            raise ConfigError('train: closure must be `cnn` or `none`, got '
                              '`{}`.'.format(self.closure))

    def schedules(self):
        from .optim import ExponentialDecay
        return {'phy': ExponentialDecay(self.phy_lr_start, self.phy_lr_floor,
                                        self.phy_lr_decay),
                'nn': ExponentialDecay(self.nn_lr_start, self.nn_lr_floor,
                                       self.nn_lr_decay)}


@dataclass
class SamplerConfig:
    """Stochastic-gradient HMC over the physical and closure parameters."""
    n_iterations: int = 2000
    step_size: float = 5e-5
    n_leapfrog: int = 10
    friction_scale: float = 0.1
    burn_in: float = 0.25
    thin: int = 5
    batch_size: int = 4
    n_obs: int = 20
    alpha1: float = 1.
    beta1: float = 1.
    alpha2: float = 1.
    beta2: float = 1.
    hyperprior_mode: str = 'log'
    resample_momentum: bool = True
    max_reject_fraction: float = 0.5
    seed: int = 0

    @property
    def friction(self):
        return self.friction_scale / self.step_size

    def validate(self):
        if not (self.step_size > 0 and self.n_leapfrog >= 1 and
                self.n_iterations >= 1 and self.thin >= 1):
            raise ConfigError('sampler: step_size > 0, n_leapfrog >= 1, '
                              'n_iterations >= 1 and thin >= 1 are required.')
        if not 0 <= self.burn_in < 1:
            raise ConfigError('sampler: burn_in is a fraction in [0, 1).')
        if min(self.alpha1, self.beta1, self.alpha2, self.beta2) <= 0:
            raise ConfigError('sampler: hyperprior shapes and rates must be '
                              'positive.')
        if self.hyperprior_mode not in ('log', 'value'):
            raise ConfigError('sampler: hyperprior_mode must be `log` or '
                              '`value`.')


@dataclass
class EvaluationConfig:
    """Online forecast comparison."""
    horizon_steps: int = 8640
    cadence: int = 24
    histogram_days: float = 100.
    n_bins: int = 64
    smagorinsky_constant: float = 0.1
    n_cases: int = 3
    n_posterior_samples: int = 0
    scale_histogram_window: bool = True

    def validate(self):
        if self.horizon_steps < 1 or self.cadence < 1 or self.n_bins < 1:
            raise ConfigError('evaluation: horizon_steps, cadence and n_bins '
                              'must be at least 1.')
        if self.smagorinsky_constant < 0:
            raise ConfigError('evaluation: the Smagorinsky constant must be '
                              'non-negative.')


SECTIONS = ('physics', 'data', 'train', 'sampler', 'evaluation')


@dataclass
class ExperimentConfig:
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def validate(self):
        for name in SECTIONS:
            getattr(self, name).validate()
        return self

    def set(self, key, value):
        """Set the dotted `key` from its text representation `value`."""
        section, name = _split_key(key)
        target = getattr(self, section)
        types = {f.name: f.type for f in fields(target)}
        if name not in types:
            raise ConfigError('Unknown configuration key `{}`.'.format(key))
        setattr(self, section,
                replace(target, **{name: _parse(types[name], value, key)}))

    def items(self):
        for name in SECTIONS:
            section = getattr(self, name)
            for f in fields(section):
                yield '{}.{}'.format(name, f.name), getattr(section, f.name)

    def dumps(self):
        return ''.join('{} = {}\n'.format(k, _format(v))
                       for k, v in self.items())

    def hash(self):
        return hashlib.sha256(self.dumps().encode('utf-8')).hexdigest()

    def save(self, path):
        with open(path, 'w') as f:
            f.write(self.dumps())


def _split_key(key):
    parts = key.strip().split('.')
    if len(parts) != 2 or parts[0] not in SECTIONS:
        raise ConfigError('Unknown configuration key `{}` (expected '
                          '`section.name` with section in {}).'.format(
                              key, ', '.join(SECTIONS)))
    return parts


def _parse(kind, text, key):
    text = text.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered not in ('true', 'false', '1', '0', 'yes', 'no'):
                raise ValueError(text)
            return lowered in ('true', '1', 'yes')
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError('Invalid value `{}` for `{}` (expected '
                          '{}).'.format(text, key, kind.__name__))


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return str(value).lower() if isinstance(value, bool) else str(value)


def parse_config(text, overrides=()):
    """Configuration from `key = value` text followed by `overrides`
    (strings of the form ``key=value``).

    """
    config = ExperimentConfig()
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError('Line {}: expected `key = value`, got '
                              '`{}`.'.format(number, line))
        key, value = line.split('=', 1)
        config.set(key, value)
    apply_overrides(config, overrides)
    return config.validate()


def apply_overrides(config, overrides):
    for item in overrides:
        if '=' not in item:
            raise ConfigError('Override `{}` is not of the form '
                              'key=value.'.format(item))
        key, value = item.split('=', 1)
        config.set(key, value)
    return config


def load_config(path=None, overrides=()):
    if path is None:
        return parse_config('', overrides)
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError('Cannot read configuration file {}: {}.'.format(
            path, e.strerror))
    return parse_config(text, overrides)
