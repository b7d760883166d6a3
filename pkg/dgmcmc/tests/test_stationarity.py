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
import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import diagnostics
from samplers import SamplerConfig
from state_spaces import EnumerationLimitError, categorical, make_ordinal_grid
import targets

KERNELS = [
    SamplerConfig('gibbs', scan='random'),
    SamplerConfig('gwg'),
    SamplerConfig('ordinal_gwg', radius=2),
    SamplerConfig('mh_uniform', radius=1),
    SamplerConfig('ncg', eps=0.5),
]


@pytest.fixture(scope='module')
def ising_oracle():
  return diagnostics.exact_oracle(
      targets.random_ising(4, np.random.default_rng(0)))


@pytest.fixture(scope='module')
def ordinal_oracle():
  target = targets.OrdinalPolyMixture(
      make_ordinal_grid(5, -1.5, 3.0), 2, 'poly2', n_components=50)
  return diagnostics.exact_oracle(target)


@pytest.mark.parametrize('config', KERNELS, ids=lambda c: c.name)
def test_ising_kernels_are_stationary(ising_oracle, config):
  P = ising_oracle.transition_matrix(config)
  np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
  assert np.all(P >= 0)
  assert ising_oracle.stationarity_error(P) < 1e-10


@pytest.mark.parametrize('config', KERNELS, ids=lambda c: c.name)
def test_ordinal_kernels_are_stationary(ordinal_oracle, config):
  P = ordinal_oracle.transition_matrix(config)
  assert ordinal_oracle.stationarity_error(P) < 1e-10


@pytest.mark.parametrize(
    'config',
    [SamplerConfig('gibbs', scan='random'),
     SamplerConfig('mh_uniform', radius=1)],
    ids=lambda c: c.name)
def test_reversible_kernels_satisfy_detailed_balance(ordinal_oracle, config):
  P = ordinal_oracle.transition_matrix(config)
  assert ordinal_oracle.detailed_balance_error(P) < 1e-12


def test_categorical_gwg_is_stationary():
  rng = np.random.default_rng(1)
  d, k = 2, 3
  J = targets.random_coupling(d * k, rng)
  # no coupling inside a one-hot group
  for g in range(d):
    J[g * k:(g + 1) * k, g * k:(g + 1) * k] = 0.0
  target = targets.QuadraticTarget(rng.normal(size=d * k), J, categorical(k))
  oracle = diagnostics.exact_oracle(target)
  assert oracle.states.shape == (9, 6)
  for config in (SamplerConfig('gwg'), SamplerConfig('gibbs', scan='random')):
    P = oracle.transition_matrix(config)
    assert oracle.stationarity_error(P) < 1e-10


def test_corrupted_acceptance_is_detected(ising_oracle):
  P = ising_oracle.transition_matrix(SamplerConfig('gwg'), acceptance=np.sqrt)
  assert ising_oracle.stationarity_error(P) > 1e-10


def test_auxiliary_kernels_have_no_matrix(ising_oracle):
  with pytest.raises(ValueError, match='No exact transition matrix'):
    ising_oracle.transition_matrix(SamplerConfig('avg', eps=0.5))
  with pytest.raises(ValueError, match='random-scan'):
    ising_oracle.transition_matrix(SamplerConfig('gibbs'))


def test_oracle_cap():
  with pytest.raises(EnumerationLimitError):
    diagnostics.exact_oracle(
        targets.make_ordinal_mixture('poly2', dim=4, n_points=50), cap=1000)


def test_oracle_suites_pass():
  results = diagnostics.stationarity_suite(seed=0)
  results += diagnostics.pavg_exactness_suite(seed=0, n_pairs=2000)
  diagnostics.assert_passed(results)
  frame = diagnostics.oracle_frame(results)
  assert frame['passed'].all()
  controls = frame[frame['expect_failure']]
  assert len(controls) == 2


def test_assert_passed_raises():
  failed = diagnostics.OracleResult('stationarity', 'x', 1.0, 1e-10, False)
  with pytest.raises(diagnostics.OracleCheckFailed, match='stationarity/x'):
    diagnostics.assert_passed([failed])
