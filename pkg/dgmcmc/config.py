"""
 Copyright 2026 The dgmcmc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
 """

import argparse
import os
from typing import List
import smart_open
import yaml
from logger import logger
from env import get_output_dir
from samplers import SamplerConfig, SamplerKind

EXPERIMENTS = ('sample', 'tune', 'ordinal', 'regression', 'ising-pcd',
               'oracle-check')

TARGET_KINDS = ('ising', 'random_ising', 'poly2', 'poly4', 'regression')

DEFAULT_TARGETS = {
    'ordinal': 'poly2',
    'regression': 'regression',
    'ising-pcd': 'ising',
}


class InvalidConfigurationError(Exception):
  """Invalid configuration."""


class ConfigItemBase:
  """Base class for configuration sections."""

  def __init__(self):
    # copy class atrributes (with values) into the instance
    members = [
        attr for attr in dir(type(self))
        if not attr.startswith('_') and
        not callable(getattr(type(self), attr)) and
        not isinstance(getattr(type(self), attr), property)
    ]
    for attr in members:
      value = getattr(self, attr)
      if isinstance(value, list):
        value = list(value)
      setattr(self, attr, value)

  def update(self, kw):
    """Update current object with values from a dict.

    Only known properties (i.e. those that exist in object's class
    as class attributes) are set.
    """
    cls = type(self)
    for k in kw:
      if hasattr(cls, k) and not callable(getattr(cls, k)):
        new_val = kw[k]
        def_val = getattr(cls, k)
        if new_val == '' and def_val != '':
          new_val = def_val
        setattr(self, k, new_val)

  def to_dict(self) -> dict:
    cls = type(self)
    return {
        attr: getattr(self, attr)
        for attr in dir(cls)
        if not attr.startswith('_') and not callable(getattr(cls, attr)) and
        not isinstance(getattr(cls, attr), property)
    }


class TargetConfig(ConfigItemBase):
  """Target distribution settings."""
  kind: str = 'poly2'
  """One of ising, random_ising, poly2, poly4, regression."""
  seed: int = 0
  """Seed for randomly generated targets and datasets."""
  dims: int = 20
  # ordinal mixtures
  n_points: int = 50
  lo: float = -1.5
  hi: float = 3.0
  n_components: int = 50
  # Ising lattice
  rows: int = 6
  cols: int = 6
  theta: float = 0.2
  circular: bool = True
  scale: float = 0.5
  # sparse regression
  n_obs: int = 20
  n_base: int = 5
  n_covariates: int = 20
  alpha_pi: float = 0.001
  beta_pi: float = 10.0
  g: float = 20.0
  lam: float = 0.001
  alpha_sigma: float = 0.1
  beta_sigma: float = 0.1
  n_padding: int = 80
  rho_pad: float = 0.001
  logdet_weight: float = 0.5

  def __str__(self) -> str:
    return 'TargetConfig ' + self.kind


class ExperimentConfig(ConfigItemBase):
  """Experiment configuration."""
  experiment: str = 'sample'
  n_chains: int = 100
  n_steps: int = 10000
  """Sampling steps after burn-in (per chunk in wall-clock mode)."""
  burn_in: int = 1000
  checkpoint_every: int = 1000
  thin: int = 10
  seed: int = 0
  threads: int = 1
  chain_block: int = 0
  """Chains per RNG stream; 0 for a single block."""
  out: str = ''
  budget: str = 'steps'
  wall_minutes: float = 10.0
  burn_in_minutes: float = 1.0
  paper_scale: bool = False
  reference_samples: int = 100000
  enumeration_cap: int = 2**20
  # adaptive PAVG
  n_sigma: int = 1000
  n_adapt: int = 100
  delta: float = 0.25
  rho: float = 0.99
  # step-size tuning
  tune_steps: int = 500
  tune_chains: int = 10
  # PCD
  pcd_iters: int = 2000
  pcd_batch: int = 50
  pcd_buffer: int = 5000
  pcd_lr: float = 0.0003
  pcd_l1: float = 0.01
  pcd_optimizer: str = 'adam'
  pcd_checkpoint_every: int = 100
  k_grid: list = [20]
  repetitions: int = 1
  ground_truth_samples: int = 2000
  ground_truth_steps: int = 200
  ground_truth_chains: int = 0

  def __init__(self) -> None:
    super().__init__()
    self.target = TargetConfig()
    self.samplers: List[SamplerConfig] = []

  def to_dict(self) -> dict:
    values = super().to_dict()
    values['target'] = self.target.to_dict()
    values['samplers'] = [s.to_dict() for s in self.samplers]
    return values

  def apply_paper_scale(self):
    """Full-size experiment settings."""
    self.paper_scale = True
    if self.experiment == 'ising-pcd':
      self.target.rows = self.target.cols = 10
      self.k_grid = [1, 5, 10, 15, 20]
      self.repetitions = 5
      self.ground_truth_samples = 10000
      self.ground_truth_steps = 1000000
      self.pcd_iters = 2000
    elif self.experiment in ('ordinal', 'regression'):
      self.budget = 'wall'
      self.wall_minutes = 10.0
      self.burn_in_minutes = 1.0

  def validate(self):
    if self.experiment not in EXPERIMENTS:
      raise InvalidConfigurationError(
          f'Unknown experiment {self.experiment}, expected one of '
          f'{", ".join(EXPERIMENTS)}')
    if self.target.kind not in TARGET_KINDS:
      raise InvalidConfigurationError(f'Unknown target {self.target.kind}')
    if self.budget not in ('steps', 'wall'):
      raise InvalidConfigurationError(f'Unknown budget {self.budget}')
    for name in ('n_chains', 'thin', 'checkpoint_every', 'threads'):
      if int(getattr(self, name)) < 1:
        raise InvalidConfigurationError(f'{name} must be >= 1')
    if self.n_steps < 0 or self.burn_in < 0:
      raise InvalidConfigurationError('Step counts must be non-negative')
    if self.pcd_batch > self.pcd_buffer:
      raise InvalidConfigurationError(
          f'pcd_buffer ({self.pcd_buffer}) is smaller than pcd_batch '
          f'({self.pcd_batch})')
    if not self.k_grid or min(self.k_grid) < 1:
      raise InvalidConfigurationError('k_grid values must be >= 1')
    for s in self.samplers:
      try:
        s.validate()
      except ValueError as e:
        raise InvalidConfigurationError(str(e)) from e


# step sizes and radii per target family
DEFAULT_PARAMETERS = {
    'poly2': {
        'ncg': {'eps': 0.05},
        'avg': {'eps': 0.02},
        'pavg': {'eps': 1000.0},
        'ordinal_gwg': {'radius': 16},
        'mh_uniform': {'radius': 2},
    },
    'poly4': {
        'ncg': {'eps': 0.05},
        'avg': {'eps': 0.02},
        'pavg': {'eps': 0.06},
        'ordinal_gwg': {'radius': 8},
        'mh_uniform': {'radius': 1},
    },
    'regression': {
        'ncg': {'eps': 0.03},
        'avg': {'eps': 1000.0},
        'pavg': {'eps': 1000.0},
        'mh_uniform': {'radius': 1},
    },
    'ising': {
        'ncg': {'eps': 0.5},
        'avg': {'eps': 0.2},
        'pavg': {'eps': 0.2},
    },
}
DEFAULT_PARAMETERS['random_ising'] = DEFAULT_PARAMETERS['ising']

DEFAULT_SAMPLERS = {
    'ordinal': ['gibbs', 'ordinal_gwg', 'mh_uniform', 'ncg', 'avg', 'pavg'],
    'regression': ['gibbs', 'gwg', 'mh_uniform', 'ncg', 'avg', 'pavg'],
    'ising-pcd': ['gibbs', 'gwg', 'ncg', 'avg', 'pavg'],
    'sample': ['ncg'],
    'tune': ['ncg', 'avg'],
    'oracle-check': [],
}


def make_sampler(name: str,
                 target_kind: str,
                 eps: float | None = None,
                 radius: int | None = None,
                 experiment: str = '') -> SamplerConfig:
  """Sampler with its documented default parameters for a target family."""
  kind = SamplerKind(name)
  params = dict(DEFAULT_PARAMETERS.get(target_kind, {}).get(kind.value, {}))
  if eps is not None:
    params['eps'] = eps
  if radius is not None:
    params['radius'] = radius
  if kind in (SamplerKind.ORDINAL_GWG, SamplerKind.MH_UNIFORM):
    params.setdefault('radius', 1)
  if kind in (SamplerKind.NCG, SamplerKind.AVG, SamplerKind.PAVG):
    params.setdefault('eps', 1.0)
  if kind == SamplerKind.PAVG:
    params['preconditioner_source'] = (
        'model' if experiment == 'ising-pcd' else 'adaptive')
  return SamplerConfig(kind=kind, **params)


def parse_arguments(argv=None) -> argparse.Namespace:
  """Initialize command line parser using argparse.

  Returns:
    Parsed arguments.
  """
  parser = argparse.ArgumentParser(
      prog='dgmcmc',
      description='Gradient-based MCMC samplers for discrete distributions')
  parser.add_argument('experiment', choices=EXPERIMENTS, help='Experiment')
  parser.add_argument('--config', help='Config file path (YAML or JSON)')
  parser.add_argument('--seed', type=int, help='Random seed')
  parser.add_argument('--threads', type=int, help='Worker threads')
  parser.add_argument('--out', help='Output directory')
  parser.add_argument('--sampler', help='Run only this sampler')
  parser.add_argument('--eps', type=float, help='Step size')
  parser.add_argument('--radius', type=int, help='Grid radius')
  parser.add_argument('--budget', choices=('steps', 'wall'), help='Budget mode')
  parser.add_argument('--wall-minutes', type=float, dest='wall_minutes')
  parser.add_argument('--n-steps', type=int, dest='n_steps')
  parser.add_argument('--n-chains', type=int, dest='n_chains')
  parser.add_argument('--target', help='Target kind')
  parser.add_argument(
      '--paper-scale',
      '--full-scale',
      action='store_true',
      dest='paper_scale',
      help='Use the full-size experiment settings')
  args = parser.parse_args(argv)
  args.config = args.config or os.environ.get('CONFIG') or ''
  return args


def _read_config_file(path: str) -> dict:
  logger.info('Using config file %s', path)
  try:
    with smart_open.open(path, 'r') as f:
      content = yaml.safe_load(f)
  except FileNotFoundError as e:
    raise InvalidConfigurationError(f'Config file {path} was not found') from e
  except yaml.YAMLError as e:
    raise InvalidConfigurationError(f'Config file {path} is invalid: {e}') from e
  if content is None:
    return {}
  if not isinstance(content, dict):
    raise InvalidConfigurationError(f'Config file {path} must hold a mapping')
  return content


def config_from_dict(values: dict, experiment: str = '') -> ExperimentConfig:
  config = ExperimentConfig()
  config.update({k: v for k, v in values.items() if k not in ('target',
                                                              'samplers')})
  if experiment:
    config.experiment = experiment
  config.target.kind = DEFAULT_TARGETS.get(config.experiment, 'poly2')
  if values.get('target'):
    config.target.update(values['target'])
  for sampler_dict in values.get('samplers') or []:
    try:
      if isinstance(sampler_dict, str):
        sampler = make_sampler(sampler_dict, config.target.kind,
                               experiment=config.experiment)
      else:
        base = make_sampler(sampler_dict['kind'], config.target.kind,
                            sampler_dict.get('eps'),
                            sampler_dict.get('radius'), config.experiment)
        merged = {**base.to_dict(), **sampler_dict}
        sampler = SamplerConfig.from_dict(merged)
    except (KeyError, ValueError) as e:
      raise InvalidConfigurationError(f'Invalid sampler {sampler_dict}: {e}') from e
    config.samplers.append(sampler)
  return config


def get_config(args: argparse.Namespace) -> ExperimentConfig:
  """Read config file and merge settings from it and command line args.

  Flags win over file values.
  """
  values = _read_config_file(args.config) if args.config else {}
  config = config_from_dict(values, args.experiment)
  if getattr(args, 'target', None):
    config.target.kind = args.target
  for name in ('seed', 'threads', 'out', 'budget', 'wall_minutes', 'n_steps',
               'n_chains'):
    value = getattr(args, name, None)
    if value is not None:
      setattr(config, name, value)
  if getattr(args, 'paper_scale', False):
    config.apply_paper_scale()
    if args.wall_minutes is not None:
      config.wall_minutes = args.wall_minutes
  if args.sampler:
    try:
      config.samplers = [
          make_sampler(args.sampler, config.target.kind, args.eps, args.radius,
                       config.experiment)
      ]
    except ValueError as e:
      raise InvalidConfigurationError(str(e)) from e
  elif not config.samplers:
    config.samplers = [
        make_sampler(name, config.target.kind, experiment=config.experiment)
        for name in DEFAULT_SAMPLERS[config.experiment]
    ]
  if not config.out:
    config.out = os.path.join(get_output_dir(), config.experiment)
  config.validate()
  logger.debug(config.to_dict())
  return config


def save_config(config: ExperimentConfig, path: str):
  """Save the effective config into a YAML file."""
  with smart_open.open(path, 'w') as f:
    yaml.safe_dump(config.to_dict(), f, sort_keys=False)
