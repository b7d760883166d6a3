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
from scipy.special import logsumexp

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from preconditioning import PreconditionerState, StalePreconditionerError
import samplers
from samplers import SamplerConfig, SamplerKind
from state_spaces import ChainEnsemble, binary01, enumerate_states
import targets


@pytest.fixture
def ising():
  return targets.random_ising(6, np.random.default_rng(0))


@pytest.fixture
def ordinal():
  return targets.make_ordinal_mixture('poly2', dim=4, n_points=9)


def test_config_validation():
  with pytest.raises(ValueError, match='positive eps'):
    SamplerConfig(SamplerKind.NCG)
  with pytest.raises(ValueError, match='radius'):
    SamplerConfig(SamplerKind.MH_UNIFORM, radius=0)
  with pytest.raises(ValueError, match='scan'):
    SamplerConfig(SamplerKind.GIBBS, scan='diagonal')
  with pytest.raises(ValueError):
    SamplerConfig('hmc')


def test_config_dict():
  cfg = SamplerConfig.from_dict({'kind': 'ordinal_gwg', 'radius': 16.0})
  assert cfg.radius == 16
  assert cfg.name == 'ordinal_gwg'
  assert cfg.to_dict()['kind'] == 'ordinal_gwg'
  with pytest.raises(ValueError, match='kind'):
    SamplerConfig.from_dict({'eps': 0.1})


def test_mh_accept_rejects_invalid_proposals():
  rng = np.random.default_rng(0)
  accepted, log_ratio = samplers.mh_accept(
      np.array([np.nan, -np.inf, 0.0]), np.zeros(3), np.zeros(3), np.zeros(3),
      0.0, rng)
  np.testing.assert_array_equal(accepted, [False, False, True])
  assert np.isneginf(log_ratio[0]) and np.isneginf(log_ratio[1])


def test_mh_accept_frequency():
  n = 100000
  rng = np.random.default_rng(0)
  accepted, log_ratio = samplers.mh_accept(
      np.full(n, 1.0), np.full(n, 1.0 - np.log(0.5)), np.full(n, 0.3),
      np.full(n, 0.3), 0.0, rng)
  np.testing.assert_allclose(log_ratio, np.log(0.5))
  assert accepted.mean() == pytest.approx(0.5, abs=0.01)
  accepted, _ = samplers.mh_accept(
      np.full(n, 0.2), np.zeros(n), np.zeros(n), np.zeros(n), -0.2, rng)
  assert accepted.all()


@pytest.mark.parametrize('config', [
    SamplerConfig('ncg', eps=0.5),
    SamplerConfig('avg', eps=0.5),
    SamplerConfig('gwg'),
    SamplerConfig('gibbs'),
    SamplerConfig('gibbs', scan='random'),
])
def test_caches_stay_consistent(ising, config):
  ensemble = ChainEnsemble.random(ising, 8, seed=1)
  trace = samplers.run_chain(ising, config, 20, ensemble)
  assert trace.accepted.shape == (20, 8)
  assert np.all(ising.space.contains(ensemble.states))
  np.testing.assert_allclose(ensemble.logf, ising.log_f(ensemble.states))
  np.testing.assert_allclose(ensemble.grad, ising.grad_f(ensemble.states))


@pytest.mark.parametrize('config', [
    SamplerConfig('ordinal_gwg', radius=2),
    SamplerConfig('mh_uniform', radius=1),
    SamplerConfig('ncg', eps=0.05),
])
def test_ordinal_kernels_stay_on_grid(ordinal, config):
  ensemble = ChainEnsemble.random(ordinal, 5, seed=3)
  samplers.run_chain(ordinal, config, 30, ensemble)
  assert np.all(ordinal.space.contains(ensemble.states))
  np.testing.assert_allclose(ensemble.logf, ordinal.log_f(ensemble.states))


def test_gibbs_always_accepts(ising):
  ensemble = ChainEnsemble.random(ising, 4, seed=0)
  trace = samplers.run_chain(ising, SamplerConfig('gibbs'), 5, ensemble)
  assert trace.acceptance_rate == 1.0
  np.testing.assert_array_equal(trace.log_accept_ratio, 0.0)


def test_pavg_with_zero_sigma_reproduces_avg():
  target = targets.random_quadratic(5, np.random.default_rng(4))
  a = ChainEnsemble.random(target, 4, seed=9)
  b = ChainEnsemble.random(target, 4, seed=9)
  eps = 0.8
  avg = samplers.run_chain(target, SamplerConfig('avg', eps=eps), 10000, a)
  pavg = samplers.run_chain(
      target,
      SamplerConfig(
          'pavg', eps=eps, preconditioner=PreconditionerState.zero(5, eps)),
      10000, b)
  np.testing.assert_array_equal(a.states, b.states)
  np.testing.assert_array_equal(avg.accepted, pavg.accepted)
  np.testing.assert_array_equal(avg.l1_jump, pavg.l1_jump)


def test_pavg_exact_on_quadratic_targets():
  target = targets.random_quadratic(20, np.random.default_rng(0))
  pre = PreconditionerState.create(target.J, eps=1.0)
  ensemble = ChainEnsemble.random(target, 10000, seed=0)
  block = ensemble.blocks[0]
  out = samplers.pavg_step(target, block, pre, block.rng)
  assert np.max(np.abs(out.log_accept_ratio)) < 1e-8
  assert out.accepted.all()


def test_pavg_needs_a_fresh_preconditioner(ising):
  pre = PreconditionerState.create(ising.J, eps=0.5)
  pre.gamma = 2.0
  ensemble = ChainEnsemble.random(ising, 2, seed=0)
  with pytest.raises(StalePreconditionerError):
    samplers.run_chain(
        ising, SamplerConfig('pavg', eps=0.5, preconditioner=pre), 1, ensemble)
  with pytest.raises(ValueError, match='preconditioner'):
    samplers.run_chain(ising, SamplerConfig('pavg', eps=0.5), 1, ensemble)


def test_results_do_not_depend_on_threads(ising):
  config = SamplerConfig('ncg', eps=0.5)
  a = ChainEnsemble.random(ising, 10, seed=5, block_size=3)
  b = ChainEnsemble.random(ising, 10, seed=5, block_size=3)
  ta = samplers.run_chain(ising, config, 50, a, threads=1)
  tb = samplers.run_chain(ising, config, 50, b, threads=4)
  np.testing.assert_array_equal(a.states, b.states)
  np.testing.assert_array_equal(ta.accepted, tb.accepted)


def test_same_seed_same_trajectory(ordinal):
  config = SamplerConfig('ordinal_gwg', radius=3)
  a = ChainEnsemble.random(ordinal, 6, seed=11)
  b = ChainEnsemble.random(ordinal, 6, seed=11)
  samplers.run_chain(ordinal, config, 40, a)
  samplers.run_chain(ordinal, config, 40, b)
  np.testing.assert_array_equal(a.states, b.states)


def test_thinning_and_history(ising):
  ensemble = ChainEnsemble.random(ising, 3, seed=0)
  trace = samplers.run_chain(
      ising, SamplerConfig('gwg'), 20, ensemble, thin=5)
  assert trace.recorded_steps == [5, 10, 15, 20]
  assert trace.history(start_step=10).shape == (3, 3, 6)
  frame = trace.to_frame()
  assert list(frame.columns) == [
      'step', 'chain', 'accepted', 'log_accept_ratio', 'l1_jump'
  ]
  assert len(frame) == 60
  assert len(trace.states_frame()) == 12


def test_callback_stops_run(ising):
  ensemble = ChainEnsemble.random(ising, 2, seed=0)
  seen = []

  def stop_after_five(step, ensemble, outcome):
    seen.append(step)
    return step == 5

  trace = samplers.run_chain(
      ising, SamplerConfig('gwg'), 100, ensemble, callbacks=[stop_after_five])
  assert trace.n_steps == 5
  assert seen == [1, 2, 3, 4, 5]
  assert ensemble.step_counter == 5


def test_invalid_thin(ising):
  ensemble = ChainEnsemble.random(ising, 2, seed=0)
  with pytest.raises(ValueError, match='thin'):
    samplers.run_chain(ising, SamplerConfig('gwg'), 10, ensemble, thin=0)


@pytest.mark.slow
@pytest.mark.parametrize('kind,eps', [('avg', 1.0), ('pavg', 1.0)])
def test_auxiliary_samplers_match_exact_marginals(kind, eps):
  rng = np.random.default_rng(2)
  target = targets.random_quadratic(3, rng, binary01())
  states = enumerate_states(binary01(), 3, cap=8)
  log_f = target.log_f(states)
  exact = np.exp(log_f - logsumexp(log_f)) @ states
  config = SamplerConfig(kind, eps=eps)
  if kind == 'pavg':
    config.preconditioner = PreconditionerState.create(target.J, eps)
  ensemble = ChainEnsemble.random(target, 1000, seed=0)
  trace = samplers.run_chain(target, config, 1100, ensemble)
  history = trace.history(start_step=101)
  assert history.shape == (1000, 1000, 3)
  empirical = history.reshape(-1, 3).mean(axis=0)
  np.testing.assert_allclose(empirical, exact, atol=0.01)
