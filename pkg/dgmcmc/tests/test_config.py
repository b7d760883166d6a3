# Copyright 2026 The dgmcmc Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import os
import sys
import pytest
import yaml

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg_module
from config import (InvalidConfigurationError, config_from_dict, get_config,
                    make_sampler, parse_arguments)
from samplers import SamplerKind


def test_defaults_per_experiment(tmp_path):
  args = parse_arguments(['ordinal', '--out', str(tmp_path)])
  config = get_config(args)
  assert config.target.kind == 'poly2'
  assert config.n_chains == 100
  assert [s.name for s in config.samplers] == [
      'gibbs', 'ordinal_gwg', 'mh_uniform', 'ncg', 'avg', 'pavg'
  ]
  pavg = config.samplers[-1]
  assert pavg.eps == 1000.0
  assert pavg.preconditioner_source == 'adaptive'
  assert config.samplers[1].radius == 16


def test_table_step_sizes():
  assert make_sampler('ncg', 'poly4').eps == 0.05
  assert make_sampler('pavg', 'poly4').eps == 0.06
  assert make_sampler('mh_uniform', 'poly4').radius == 1
  assert make_sampler('ncg', 'regression').eps == 0.03
  assert make_sampler('avg', 'ising').eps == 0.2
  assert make_sampler('pavg', 'ising',
                      experiment='ising-pcd').preconditioner_source == 'model'
  assert make_sampler('gwg', 'regression').kind == SamplerKind.GWG


def test_flags_override_file(tmp_path):
  path = tmp_path / 'run.yaml'
  path.write_text(
      yaml.safe_dump({
          'seed': 3,
          'n_chains': 7,
          'target': {
              'kind': 'poly4',
              'dims': 5
          },
          'samplers': ['ncg', {
              'kind': 'avg',
              'eps': 0.5
          }],
      }))
  args = parse_arguments([
      'ordinal', '--config',
      str(path), '--seed', '11', '--out',
      str(tmp_path)
  ])
  config = get_config(args)
  assert config.seed == 11
  assert config.n_chains == 7
  assert config.target.kind == 'poly4'
  assert config.target.dims == 5
  assert [(s.name, s.eps) for s in config.samplers] == [('ncg', 0.05),
                                                        ('avg', 0.5)]


def test_sampler_flag(tmp_path):
  args = parse_arguments([
      'sample', '--sampler', 'ordinal_gwg', '--radius', '4', '--out',
      str(tmp_path)
  ])
  config = get_config(args)
  assert len(config.samplers) == 1
  assert config.samplers[0].radius == 4


def test_paper_scale():
  args = parse_arguments(['ising-pcd', '--paper-scale', '--out', 'x'])
  config = get_config(args)
  assert config.target.rows == 10
  assert config.k_grid == [1, 5, 10, 15, 20]
  assert config.repetitions == 5
  args = parse_arguments(['ordinal', '--paper-scale', '--out', 'x'])
  assert get_config(args).budget == 'wall'
  args = parse_arguments(['ising-pcd', '--full-scale', '--out', 'x'])
  assert args.paper_scale
  assert not parse_arguments(['ising-pcd']).paper_scale


def test_invalid_values(tmp_path):
  with pytest.raises(InvalidConfigurationError, match='pcd_buffer'):
    config_from_dict({
        'pcd_batch': 100,
        'pcd_buffer': 10
    }, 'ising-pcd').validate()
  with pytest.raises(InvalidConfigurationError, match='Unknown target'):
    config_from_dict({'target': {'kind': 'gaussian'}}, 'sample').validate()
  with pytest.raises(InvalidConfigurationError, match='Invalid sampler'):
    config_from_dict({'samplers': [{'kind': 'ncg', 'eps': -1}]}, 'sample')
  with pytest.raises(InvalidConfigurationError, match='n_chains'):
    config_from_dict({'n_chains': 0}, 'sample').validate()


def test_config_file_errors(tmp_path):
  args = parse_arguments(['sample', '--config', str(tmp_path / 'missing.yaml')])
  with pytest.raises(InvalidConfigurationError, match='not found'):
    get_config(args)
  bad = tmp_path / 'list.yaml'
  bad.write_text('- 1\n- 2\n')
  args = parse_arguments(['sample', '--config', str(bad)])
  with pytest.raises(InvalidConfigurationError, match='mapping'):
    get_config(args)


def test_config_env_var(tmp_path, monkeypatch):
  path = tmp_path / 'env.yaml'
  path.write_text('n_steps: 42\n')
  monkeypatch.setenv('CONFIG', str(path))
  config = get_config(parse_arguments(['sample', '--out', str(tmp_path)]))
  assert config.n_steps == 42


def test_save_config_round_trip(tmp_path):
  config = get_config(parse_arguments(['regression', '--out', str(tmp_path)]))
  path = str(tmp_path / 'config.yaml')
  cfg_module.save_config(config, path)
  values = yaml.safe_load(open(path))
  reloaded = config_from_dict(values, 'regression')
  assert reloaded.target.n_padding == 80
  assert [s.name for s in reloaded.samplers] == [
      s.name for s in config.samplers
  ]


def test_unknown_experiment():
  with pytest.raises(SystemExit):
    parse_arguments(['train'])
