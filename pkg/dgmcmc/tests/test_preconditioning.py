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
import preconditioning
from preconditioning import (AdaptationHistory, AdaptiveConfig,
                             DegenerateFitError, PreconditionerState,
                             StalePreconditionerError, adapt_gamma, fit_sigma)
from state_spaces import ChainEnsemble, binary01, random_states
import targets


def test_shifted_square_root():
  Sigma = np.array([[0.0, 1.0], [1.0, 0.0]])
  pre = PreconditionerState.create(Sigma, eps=0.5)
  # eigenvalues are -1 and 1
  assert pre.d_eps == pytest.approx(1.0 + 4.0)
  assert pre.lambda_min == pytest.approx(-1.0)
  root = pre.Sigma_eps_sqrt
  np.testing.assert_allclose(root @ root, Sigma + pre.d_eps * np.eye(2))
  np.testing.assert_allclose(root, root.T)


def test_zero_sigma_is_isotropic():
  pre = PreconditionerState.zero(3, eps=0.25)
  assert pre.isotropic
  assert pre.d_eps == 8.0
  z = np.arange(6.0).reshape(2, 3)
  np.testing.assert_array_equal(pre.transform(z), np.sqrt(8.0) * z)
  np.testing.assert_array_equal(pre.drift(z), np.zeros_like(z))


def test_stale_state_is_detected():
  pre = PreconditionerState.create(np.eye(2) - np.diag([1, 1]), eps=1.0)
  pre.ensure_fresh()
  pre.eps = 2.0
  with pytest.raises(StalePreconditionerError):
    pre.ensure_fresh()
  fresh = preconditioning.refresh_sqrt(pre)
  fresh.ensure_fresh()
  assert fresh.d_eps == pytest.approx(1.0)


def test_with_gamma_scales_sigma():
  Sigma = np.array([[0.0, 0.5], [0.5, 0.0]])
  pre = PreconditionerState.create(Sigma, eps=1.0).with_gamma(2.0, 1.0)
  assert pre.is_fresh()
  assert pre.gamma_old == 1.0
  np.testing.assert_allclose(pre.drift(np.array([[1.0, 1.0]])), [[1.0, 1.0]])


def test_invalid_preconditioner():
  with pytest.raises(ValueError, match='positive'):
    PreconditionerState.create(np.eye(2), eps=0.0)
  with pytest.raises(ValueError, match='square'):
    PreconditionerState.create(np.ones((2, 3)), eps=1.0)


@pytest.mark.parametrize(
    'gamma,gamma_old,jump_new,jump_old,expected',
    [
        # |gamma| >= 1: multiplicative steps
        (2.0, 1.0, 1.0, 0.5, 2.5),  # increased, improved
        (2.0, 1.0, 0.5, 1.0, 1.5),  # increased, worse
        (2.0, 3.0, 1.0, 0.5, 1.5),  # decreased, improved
        (2.0, 3.0, 0.5, 1.0, 2.5),  # decreased, worse
        # |gamma| < 1: additive steps
        (0.5, 0.25, 1.0, 0.5, 0.75),
        (0.5, 0.25, 0.5, 1.0, 0.25),
        (0.5, 0.75, 1.0, 0.5, 0.25),
        (0.5, 0.75, 0.5, 1.0, 0.75),
    ])
def test_adapt_gamma_truth_table(gamma, gamma_old, jump_new, jump_old,
                                 expected):
  new_gamma, previous = adapt_gamma(gamma, gamma_old, 0.25, jump_new, jump_old)
  assert new_gamma == pytest.approx(expected)
  assert previous == gamma


def _quadratic_pairs(target, n, rng):
  s = random_states(target.space, target.dim, n, rng)
  s_next = random_states(target.space, target.dim, n, rng)
  f, grad = target.log_f_and_grad(s)
  return s, s_next, f, target.log_f(s_next), grad


def test_fit_recovers_exact_quadratic():
  rng = np.random.default_rng(0)
  target = targets.random_quadratic(8, rng)
  fit = fit_sigma(
      _quadratic_pairs(target, 500, rng), {
          'model': target.J,
          'identity': np.eye(8)
      })
  assert fit.candidate == 'model'
  assert fit.gamma0 == pytest.approx(1.0, abs=1e-8)
  assert fit.residual < 1e-10


def test_fit_needs_moves():
  s = np.zeros((5, 3))
  pairs = (s, s.copy(), np.zeros(5), np.zeros(5), np.zeros((5, 3)))
  with pytest.raises(DegenerateFitError):
    fit_sigma(pairs, {'identity': np.eye(3)})


def test_fit_named_candidates_need_history():
  rng = np.random.default_rng(0)
  target = targets.random_quadratic(4, rng)
  with pytest.raises(ValueError, match='AdaptationHistory'):
    fit_sigma(_quadratic_pairs(target, 10, rng), ('covariance',))


def test_history_windows():
  history = AdaptationHistory(window=3)
  for j in [1, 1, 1, 2, 2, 2, 5]:
    history.record_jump(j)
  assert history.n_complete_windows == 2
  assert history.last_two_windows() == (1.0, 2.0)
  with pytest.raises(ValueError):
    AdaptationHistory(window=3).last_two_windows()


def test_data_candidates():
  rng = np.random.default_rng(0)
  data = rng.choice([-1.0, 1.0], size=(2000, 4))
  candidates = preconditioning.ebm_sigma_from_data(data)
  np.testing.assert_allclose(
      candidates['precision'] @ candidates['covariance'], np.eye(4), atol=1e-8)
  constant = preconditioning.ebm_sigma_from_data(np.ones((10, 3)))
  assert constant['precision'] is None


def test_adaptive_loop_rounds():
  target = targets.random_quadratic(5, np.random.default_rng(1), binary01())
  ensemble = ChainEnsemble.random(target, 50, seed=0)
  config = AdaptiveConfig(eps=1.0, n_steps=60, n_sigma=20, n_adapt=10)
  result = preconditioning.adaptive_loop(
      target, config, ensemble, record_states=False)
  events = [(r['event'], r['step']) for r in result.rounds]
  assert events == [('fit', 20), ('adapt', 40), ('adapt', 50), ('adapt', 60)]
  assert result.rounds[1]['delta'] == pytest.approx(0.25 * 0.99)
  assert result.rounds[-1]['delta'] == pytest.approx(0.25 * 0.99**3)
  assert not result.preconditioner.isotropic
  assert result.preconditioner.is_fresh()
  assert result.trace.n_steps == 60


def test_save_and_load(tmp_path):
  Sigma = np.array([[0.0, 0.3], [0.3, 0.0]])
  pre = PreconditionerState.create(Sigma, eps=0.2, gamma=1.5, delta=0.1)
  path = str(tmp_path / 'pre')
  preconditioning.save_preconditioner(pre, path)
  loaded = preconditioning.load_preconditioner(path)
  np.testing.assert_array_equal(loaded.Sigma, pre.Sigma)
  assert loaded.gamma == 1.5
  assert loaded.delta == 0.1
  assert loaded.d_eps == pytest.approx(pre.d_eps)
