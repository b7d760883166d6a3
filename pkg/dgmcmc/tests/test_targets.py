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
from scipy import integrate
from scipy.special import gammaln, logsumexp

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import TargetConfig
from state_spaces import (EnumerationLimitError, binary01, enumerate_states,
                          make_ordinal_grid, random_states)
import targets


@pytest.fixture
def regression_target():
  rng = np.random.default_rng(0)
  X, y = targets.make_regression_dataset(rng, n_obs=12, n_covariates=8)
  return targets.SparseRegressionPosterior(X, y, n_padding=3)


def test_ising_energy_by_hand():
  J = np.array([[0.0, 0.5], [0.5, 0.0]])
  model = targets.IsingModel(np.array([0.1, -0.2]), J)
  s = np.array([1.0, -1.0])
  # b.s = 0.3, 1/2 s^T J s = -0.5
  assert targets.ising_log_f(model, s) == pytest.approx(-0.2)
  np.testing.assert_allclose(
      targets.ising_grad_f(model, s), [0.1 - 0.5, -0.2 + 0.5])


def test_quadratic_target_validation():
  with pytest.raises(ValueError, match='symmetric'):
    targets.QuadraticTarget(np.zeros(2), np.array([[0, 1], [0, 0.0]]),
                            binary01())
  with pytest.raises(ValueError, match='zero diagonal'):
    targets.QuadraticTarget(np.zeros(2), np.eye(2), binary01())
  with pytest.raises(ValueError, match='does not match'):
    targets.QuadraticTarget(np.zeros(3), np.zeros((2, 2)), binary01())


def test_dimension_mismatch():
  model = targets.random_ising(4, np.random.default_rng(0))
  with pytest.raises(ValueError, match='Dimension mismatch'):
    model.log_f(np.ones(3))


def test_lattice_adjacency():
  adj = targets.lattice_adjacency(3, 3, circular=True)
  np.testing.assert_array_equal(adj.sum(axis=1), np.full(9, 4))
  open_adj = targets.lattice_adjacency(3, 3, circular=False)
  assert open_adj.sum() == 2 * 12
  # 2 x 2 torus: wrap edges coincide with the direct ones
  np.testing.assert_array_equal(
      targets.lattice_adjacency(2, 2, circular=True).sum(axis=1), [2, 2, 2, 2])


def test_lattice_ising():
  model = targets.make_lattice_ising(6, 6, 0.2, True)
  assert model.dim == 36
  np.testing.assert_allclose(model.J.sum(axis=1), np.full(36, 0.8))
  np.testing.assert_array_equal(model.b, np.zeros(36))


@pytest.mark.parametrize('family', ['poly2', 'poly4'])
def test_ordinal_mixture_by_hand(family):
  target = targets.make_ordinal_mixture(family, dim=3, n_points=5)
  s = target.space.grid[[0, 2, 4]]
  scores = target.factor(s).sum(axis=1)
  assert target.log_f(s) == pytest.approx(logsumexp(scores))


@pytest.mark.parametrize('family', ['poly2', 'poly4'])
def test_ordinal_mixture_exact_marginals(family):
  target = targets.make_ordinal_mixture(family, dim=2, n_points=5)
  states = enumerate_states(target.space, 2, cap=100)
  probs = np.exp(target.log_f(states) - logsumexp(target.log_f(states)))
  idx = target.space.to_indices(states)
  brute = np.stack([np.bincount(idx[:, i], probs, minlength=5) for i in range(2)])
  np.testing.assert_allclose(target.exact_marginals(), brute, atol=1e-12)
  mean = probs @ states
  cov = (states - mean).T @ ((states - mean) * probs[:, None])
  np.testing.assert_allclose(target.exact_covariance(), cov, atol=1e-10)


def test_ordinal_mixture_exact_samples():
  target = targets.make_ordinal_mixture('poly2', dim=2, n_points=5)
  samples = target.sample_exact(20000, np.random.default_rng(0))
  assert np.all(target.space.contains(samples))
  idx = target.space.to_indices(samples)
  freq = np.bincount(idx[:, 0], minlength=5) / idx.shape[0]
  np.testing.assert_allclose(freq, target.exact_marginals()[0], atol=0.02)


def test_ordinal_mixture_rejects_categorical():
  from state_spaces import categorical
  with pytest.raises(ValueError, match='ordinal'):
    targets.OrdinalPolyMixture(categorical(3), 2)


@pytest.mark.parametrize('name', ['ising', 'poly2', 'poly4', 'regression'])
def test_gradients_match_finite_differences(name):
  rng = np.random.default_rng(1)
  if name == 'ising':
    target = targets.make_lattice_ising(3, 3, 0.2, True)
  elif name == 'regression':
    X, y = targets.make_regression_dataset(rng)
    target = targets.SparseRegressionPosterior(X, y, n_padding=5)
  else:
    target = targets.make_ordinal_mixture(name, dim=5)
  for p in random_states(target.space, target.n_factors, 20, rng):
    assert targets.gradient_relative_error(target, p) < 1e-4


def test_regression_dataset_duplicates():
  X, y = targets.make_regression_dataset(np.random.default_rng(0))
  assert X.shape == (20, 20)
  # covariate 6 (1-based) copies covariate 2
  np.testing.assert_array_equal(X[:, 5], X[:, 1])
  np.testing.assert_array_equal(X[:, 9], X[:, 0])
  np.testing.assert_array_equal(y, X[:, :5].sum(axis=1))
  assert set(np.unique(X)) <= {0.0, 1.0, 2.0}


def test_regression_rejects_off_lattice(regression_target):
  with pytest.raises(ValueError, match='support'):
    regression_target.log_f(np.full(regression_target.dim, 0.5))


def test_regression_padding_term(regression_target):
  s = np.zeros(regression_target.dim)
  t = s.copy()
  t[-1] = 1.0
  diff = regression_target.log_f(t) - regression_target.log_f(s)
  assert diff == pytest.approx(np.log(0.001) - np.log(0.999))


def test_regression_exact_moments(regression_target):
  t = regression_target
  states = enumerate_states(binary01(), t.dim, cap=2**12)
  log_f = t.log_f(states)
  probs = np.exp(log_f - logsumexp(log_f))
  mean, second = t.exact_moments(chunk=64)
  np.testing.assert_allclose(mean, probs @ states, atol=1e-10)
  np.testing.assert_allclose(
      second, states.T @ (states * probs[:, None]), atol=1e-10)
  np.testing.assert_allclose(t.exact_marginals()[t.D:, 1], 0.001)
  pair = targets.pairwise_from_moments(mean, second)
  np.testing.assert_allclose(pair.sum(axis=(2, 3)), 1.0)


def test_regression_enumeration_cap(regression_target):
  with pytest.raises(EnumerationLimitError):
    regression_target.exact_moments(cap=16)


def test_make_target_kinds():
  cfg = TargetConfig()
  cfg.kind = 'poly4'
  cfg.dims = 4
  assert targets.make_target(cfg).dim == 4
  cfg.kind = 'ising'
  assert targets.make_target(cfg).dim == 36
  cfg.kind = 'regression'
  assert targets.make_target(cfg).dim == 100
  cfg.kind = 'unknown'
  with pytest.raises(ValueError, match='Unknown target'):
    targets.make_target(cfg)


def test_ordinal_grid_default_constants():
  space = make_ordinal_grid(50, -1.5, 3.0)
  target = targets.OrdinalPolyMixture(space, 20)
  assert target.n_components == 50
  assert target.log_f(np.zeros((3, 20))).shape == (3,)


@pytest.mark.parametrize('seed', range(5))
def test_ising_sign_flip_symmetry(seed):
  rng = np.random.default_rng(seed)
  model = targets.random_ising(6, rng)
  flipped = targets.IsingModel(-model.b, model.J)
  states = random_states(model.space, model.dim, 20, rng)
  np.testing.assert_allclose(
      flipped.log_f(-states), model.log_f(states), rtol=1e-12)


def _log_evidence(x, y, g, lam, alpha, beta):
  """Marginal likelihood of y by quadrature over (w, log sigma^2).

  w ~ N(0, g sigma^2 / (x.x + lam)), sigma^2 ~ InvGamma(alpha, beta); x is
  None for the empty model.
  """
  n = y.size

  def log_noise(t):
    # log density of sigma^2 = exp(t) times the Jacobian exp(t)
    return alpha * np.log(beta) - gammaln(alpha) - alpha * t - beta * np.exp(-t)

  def log_lik(w, t):
    resid = y if x is None else y - w * x
    return -0.5 * n * (np.log(2 * np.pi) + t) - resid @ resid / (2 * np.exp(t))

  if x is None:
    value, _ = integrate.quad(
        lambda t: np.exp(log_lik(0.0, t) + log_noise(t)), -10.0, 8.0,
        epsabs=1e-14, epsrel=1e-10, limit=200)
    return np.log(value)

  c = x @ x + lam
  shrunk = x @ x + c / g
  mean = x @ y / shrunk

  def integrand(w, t):
    var = g * np.exp(t) / c
    log_prior = -0.5 * (np.log(2 * np.pi * var) + w * w / var)
    return np.exp(log_lik(w, t) + log_prior + log_noise(t))

  def half_width(t):
    return 12.0 * np.sqrt(np.exp(t) / shrunk)

  value, _ = integrate.dblquad(
      integrand, -10.0, 8.0, lambda t: mean - half_width(t),
      lambda t: mean + half_width(t), epsabs=1e-14, epsrel=1e-10)
  return np.log(value)


def test_regression_matches_integrated_likelihood():
  X = np.array([[1.0, 0.0], [2.0, 1.0], [0.0, 1.0], [1.0, 2.0], [2.0, 2.0],
                [1.0, 0.0]])
  y = np.array([1.3, 2.1, 0.4, 1.2, 2.5, 0.8])
  params = dict(alpha_pi=1.0, beta_pi=1.0, g=4.0, lam=0.5, alpha_sigma=2.0,
                beta_sigma=1.0)
  target = targets.SparseRegressionPosterior(X, y, **params)
  log_f = target.mask_log_f(np.array([[1.0, 0.0], [0.0, 0.0]]))
  # prior over the number of selected covariates, D = 2
  prior = gammaln(1 + 1.0) + gammaln(1 + 1.0) - gammaln(0 + 1.0) - gammaln(
      2 + 1.0)
  evidence = _log_evidence(X[:, 0], y, 4.0, 0.5, 2.0, 1.0) - _log_evidence(
      None, y, 4.0, 0.5, 2.0, 1.0)
  assert log_f[0] - log_f[1] == pytest.approx(prior + evidence, abs=1e-6)

  literal = targets.SparseRegressionPosterior(X, y, logdet_weight=1.0,
                                              **params)
  literal_f = literal.mask_log_f(np.array([[1.0, 0.0], [0.0, 0.0]]))
  assert abs(literal_f[0] - literal_f[1] - prior - evidence) > 0.5
