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

Target distributions with analytic gradients of the continuous extension.

Every target evaluates batches: `log_f` maps an (n, dim) array to (n,) and
`grad_f` to (n, dim). A single 1-D state is accepted as well and gives a
scalar / 1-D result.
"""

import abc
import enum
import numpy as np
import pandas as pd
from scipy.special import digamma, gammaln, logsumexp, softmax

from logger import logger
from state_spaces import (EnumerationLimitError, StateSpace, binary01,
                          binary_pm1, make_ordinal_grid)

logger = logger.getChild('targets')


def _as_batch(states: np.ndarray) -> tuple[np.ndarray, bool]:
  states = np.asarray(states, dtype=float)
  if states.ndim == 1:
    return states[None, :], True
  return states, False


class TargetDistribution(abc.ABC):
  """Unnormalized log-mass f(s) and its gradient on R^dim."""

  space: StateSpace
  dim: int
  strict_support = False
  """True to reject off-lattice input in `log_f`."""

  @property
  def n_factors(self) -> int:
    return self.space.n_factors(self.dim)

  @abc.abstractmethod
  def _log_f(self, states: np.ndarray) -> np.ndarray:
    """f on a batch of the continuous extension."""

  @abc.abstractmethod
  def _grad_f(self, states: np.ndarray) -> np.ndarray:
    """Gradient of `_log_f` on a batch."""

  def _log_f_and_grad(self, states: np.ndarray):
    return self._log_f(states), self._grad_f(states)

  def _check(self, states: np.ndarray, strict: bool):
    if states.shape[-1] != self.dim:
      raise ValueError(f'Dimension mismatch: got {states.shape[-1]}, '
                       f'expected {self.dim}')
    if strict and not np.all(self.space.contains(states)):
      raise ValueError(f'States are not in the support of {self.space}')

  def log_f(self, states: np.ndarray):
    batch, single = _as_batch(states)
    self._check(batch, self.strict_support)
    res = self._log_f(batch)
    return res[0] if single else res

  def grad_f(self, states: np.ndarray):
    batch, single = _as_batch(states)
    self._check(batch, False)
    res = self._grad_f(batch)
    return res[0] if single else res

  def log_f_and_grad(self, states: np.ndarray):
    """f and grad f together; what every sampler step needs."""
    batch, single = _as_batch(states)
    self._check(batch, self.strict_support)
    logf, grad = self._log_f_and_grad(batch)
    if single:
      return logf[0], grad[0]
    return logf, grad

  def continuous_log_f(self, x: np.ndarray):
    """f of the continuous extension, no support check."""
    batch, single = _as_batch(x)
    self._check(batch, False)
    res = self._log_f(batch)
    return res[0] if single else res


def finite_difference_grad(target: TargetDistribution,
                           x: np.ndarray,
                           h: float = 1e-5) -> np.ndarray:
  """Central differences of the continuous extension at a single point."""
  x = np.asarray(x, dtype=float)
  shifts = np.eye(x.size) * h
  f_plus = target.continuous_log_f(x[None, :] + shifts)
  f_minus = target.continuous_log_f(x[None, :] - shifts)
  return (f_plus - f_minus) / (2 * h)


def gradient_relative_error(target: TargetDistribution,
                            x: np.ndarray,
                            h: float = 1e-5) -> float:
  """||fd - grad|| / max(1, ||grad||) at a single point."""
  analytic = target.grad_f(x)
  numeric = finite_difference_grad(target, x, h)
  return float(
      np.linalg.norm(numeric - analytic) /
      max(1.0, np.linalg.norm(analytic)))


class QuadraticTarget(TargetDistribution):
  """f(s) = b^T s + 1/2 s^T J s with J symmetric and zero diagonal."""

  def __init__(self, b: np.ndarray, J: np.ndarray, space: StateSpace):
    b = np.asarray(b, dtype=float)
    J = np.asarray(J, dtype=float)
    if J.shape != (b.size, b.size):
      raise ValueError(f'Coupling shape {J.shape} does not match bias '
                       f'length {b.size}')
    if not np.allclose(J, J.T, rtol=0, atol=1e-12):
      raise ValueError('Coupling matrix must be symmetric')
    if np.any(np.diag(J) != 0):
      raise ValueError('Coupling matrix must have a zero diagonal')
    self.b = b
    self.J = J
    self.space = space
    self.dim = b.size

  def _log_f(self, states):
    return states @ self.b + 0.5 * np.einsum('ni,ij,nj->n', states, self.J,
                                             states)

  def _grad_f(self, states):
    return self.b[None, :] + states @ self.J

  def _log_f_and_grad(self, states):
    Js = states @ self.J
    logf = states @ self.b + 0.5 * np.sum(states * Js, axis=1)
    return logf, self.b[None, :] + Js


class IsingModel(QuadraticTarget):
  """Ising model on {-1, +1}^d."""

  def __init__(self, b: np.ndarray, J: np.ndarray):
    super().__init__(b, J, binary_pm1())

  def with_coupling(self, J: np.ndarray) -> 'IsingModel':
    return IsingModel(self.b, J)


def ising_log_f(m: IsingModel, s: np.ndarray):
  return m.log_f(s)


def ising_grad_f(m: IsingModel, s: np.ndarray):
  return m.grad_f(s)


def lattice_adjacency(rows: int, cols: int, circular: bool) -> np.ndarray:
  """Binary adjacency of a rows x cols grid.

  Wrap-around edges that duplicate an existing edge (or would be a self
  loop) collapse into a single entry.
  """
  if rows * cols == 0:
    raise ValueError(f'Empty lattice {rows}x{cols}')
  n = rows * cols
  adj = np.zeros((n, n))
  for r in range(rows):
    for c in range(cols):
      i = r * cols + c
      for dr, dc in ((1, 0), (0, 1)):
        rr, cc = r + dr, c + dc
        if circular:
          rr, cc = rr % rows, cc % cols
        elif rr >= rows or cc >= cols:
          continue
        j = rr * cols + cc
        if i != j:
          adj[i, j] = adj[j, i] = 1.0
  return adj


def make_lattice_ising(rows: int, cols: int, theta: float,
                       circular: bool) -> IsingModel:
  J = theta * lattice_adjacency(rows, cols, circular)
  return IsingModel(np.zeros(rows * cols), J)


def random_coupling(d: int, rng: np.random.Generator,
                    scale: float = 0.5) -> np.ndarray:
  """Dense symmetric coupling with zero diagonal, entries N(0, scale^2)."""
  upper = np.triu(rng.normal(0.0, scale, size=(d, d)), k=1)
  return upper + upper.T


def random_quadratic(d: int,
                     rng: np.random.Generator,
                     space: StateSpace | None = None,
                     scale: float = 0.5) -> QuadraticTarget:
  space = space or binary01()
  return QuadraticTarget(
      rng.normal(0.0, scale, size=d), random_coupling(d, rng, scale), space)


def random_ising(d: int, rng: np.random.Generator,
                 scale: float = 0.5) -> IsingModel:
  return IsingModel(
      rng.normal(0.0, scale, size=d), random_coupling(d, rng, scale))


class PolynomialFamily(str, enum.Enum):
  SECOND_ORDER = 'poly2'
  FOURTH_ORDER = 'poly4'


class OrdinalPolyMixture(TargetDistribution):
  """log sum_k exp(sum_i g_k(s_i)) for polynomial factors g_k.

  poly2: g_k(u) = 1.5 - 2t - 6t^2 with t = u + k/25
  poly4: g_k(u) = -t + t^2 - t^3 - t^4 with t = 2u - 1 + 3k/50
  """

  def __init__(self,
               space: StateSpace,
               dim: int,
               family: PolynomialFamily | str = PolynomialFamily.SECOND_ORDER,
               n_components: int = 50):
    if space.is_categorical:
      raise ValueError('Polynomial mixtures need an ordinal space')
    if n_components < 1 or dim < 1:
      raise ValueError('n_components and dim must be positive')
    self.space = space
    self.dim = dim
    self.family = PolynomialFamily(family)
    self.n_components = n_components
    self.components = np.arange(1, n_components + 1, dtype=float)

  def _t(self, u: np.ndarray) -> np.ndarray:
    k = self.components.reshape((-1,) + (1,) * (u.ndim - 1))
    if self.family == PolynomialFamily.SECOND_ORDER:
      return u[None, ...] + k / 25.0
    return 2.0 * u[None, ...] - 1.0 + 3.0 * k / 50.0

  def factor(self, u: np.ndarray) -> np.ndarray:
    """g_k(u) for every component; shape (K,) + u.shape."""
    t = self._t(np.asarray(u, dtype=float))
    if self.family == PolynomialFamily.SECOND_ORDER:
      return 1.5 - 2.0 * t - 6.0 * t**2
    return -t + t**2 - t**3 - t**4

  def factor_derivative(self, u: np.ndarray) -> np.ndarray:
    t = self._t(np.asarray(u, dtype=float))
    if self.family == PolynomialFamily.SECOND_ORDER:
      return -2.0 - 12.0 * t
    # chain factor dt/du = 2
    return 2.0 * (-1.0 + 2.0 * t - 3.0 * t**2 - 4.0 * t**3)

  def _component_scores(self, states):
    # (K, n, d) -> (n, K)
    return self.factor(states).sum(axis=-1).T

  def _log_f(self, states):
    return logsumexp(self._component_scores(states), axis=1)

  def _grad_f(self, states):
    return self._log_f_and_grad(states)[1]

  def _log_f_and_grad(self, states):
    g = self.factor(states)
    scores = g.sum(axis=-1).T
    weights = softmax(scores, axis=1)
    dg = self.factor_derivative(states)
    grad = np.einsum('nk,kni->ni', weights, dg)
    return logsumexp(scores, axis=1), grad

  def component_log_weights(self) -> np.ndarray:
    """Log probability of each component under the normalized target.

    Components are unweighted in f, so component k carries the mass of its
    product of per-dimension normalizers.
    """
    log_z = logsumexp(self.factor(self.space.grid), axis=1)
    log_w = self.dim * log_z
    return log_w - logsumexp(log_w)

  def component_factor_probs(self) -> np.ndarray:
    """Per-dimension distribution over the grid for each component, (K, k)."""
    return softmax(self.factor(self.space.grid), axis=1)

  def exact_marginals(self) -> np.ndarray:
    """(dim, k) exact univariate marginals."""
    w = np.exp(self.component_log_weights())
    marginal = w @ self.component_factor_probs()
    return np.tile(marginal, (self.dim, 1))

  def exact_covariance(self) -> np.ndarray:
    """Closed-form covariance of the mixture of product distributions."""
    w = np.exp(self.component_log_weights())
    probs = self.component_factor_probs()
    grid = self.space.grid
    m1 = probs @ grid
    m2 = probs @ grid**2
    mean = w @ m1
    cross = w @ m1**2 - mean**2
    var = w @ m2 - mean**2
    cov = np.full((self.dim, self.dim), cross)
    np.fill_diagonal(cov, var)
    return cov

  def sample_exact(self, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a component, then every dimension from that component's factor."""
    w = np.exp(self.component_log_weights())
    comps = rng.choice(self.n_components, size=n, p=w / w.sum())
    probs = self.component_factor_probs()
    cdf = np.cumsum(probs[comps], axis=1)
    u = rng.random((n, self.dim, 1)) * cdf[:, None, -1:]
    idx = np.minimum(
        np.sum(cdf[:, None, :] <= u, axis=-1), self.space.k - 1)
    return self.space.grid[idx]


def ordinal_mixture_log_f(t: OrdinalPolyMixture, s: np.ndarray):
  return t.log_f(s)


def ordinal_mixture_grad_f(t: OrdinalPolyMixture, s: np.ndarray):
  return t.grad_f(s)


def make_ordinal_mixture(family: str = 'poly2',
                         dim: int = 20,
                         n_points: int = 50,
                         lo: float = -1.5,
                         hi: float = 3.0,
                         n_components: int = 50) -> OrdinalPolyMixture:
  return OrdinalPolyMixture(
      make_ordinal_grid(n_points, lo, hi), dim, family, n_components)


class SparseRegressionPosterior(TargetDistribution):
  """Posterior over binary covariate masks with a perturbed g-prior.

  The first D coordinates select columns of X; P padding coordinates are
  independent Bernoulli(rho_pad) variables.
  """

  strict_support = True
  _CHUNK = 4096

  def __init__(self,
               X: np.ndarray,
               y: np.ndarray,
               alpha_pi: float = 0.001,
               beta_pi: float = 10.0,
               g: float = 20.0,
               lam: float = 0.001,
               alpha_sigma: float = 0.1,
               beta_sigma: float = 0.1,
               n_padding: int = 0,
               rho_pad: float = 0.001,
               logdet_weight: float = 0.5):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
      raise ValueError(f'Incompatible shapes X={X.shape}, y={y.shape}')
    if not 0 < rho_pad < 1:
      raise ValueError('rho_pad must lie in (0, 1)')
    if lam <= 0:
      raise ValueError('lambda must be positive')
    self.X = X
    self.y = y
    self.N, self.D = X.shape
    self.alpha_pi = alpha_pi
    self.beta_pi = beta_pi
    self.g = g
    self.lam = lam
    self.alpha_sigma = alpha_sigma
    self.beta_sigma = beta_sigma
    self.n_padding = int(n_padding)
    self.rho_pad = rho_pad
    self.logdet_weight = logdet_weight
    self.space = binary01()
    self.dim = self.D + self.n_padding
    self.gram = X.T @ X
    self.xty = X.T @ y
    self.yty = float(y @ y)
    self.kappa = (2.0 * alpha_sigma + self.N) / 2.0
    self.pad_logit = float(np.log(rho_pad) - np.log1p(-rho_pad))

  def _mask_parts(self, masks: np.ndarray):
    eye = np.eye(self.D)
    sas = masks[:, :, None] * self.gram[None, :, :] * masks[:, None, :]
    m1 = sas + self.lam * eye
    m2 = (1.0 + self.g) * sas + self.lam * eye
    return m1, m2

  def _mask_log_f(self, masks: np.ndarray) -> np.ndarray:
    m1, m2 = self._mask_parts(masks)
    _, logdet1 = np.linalg.slogdet(m1)
    _, logdet2 = np.linalg.slogdet(m2)
    v = masks * self.xty[None, :]
    w = np.linalg.solve(m2, v[:, :, None])[:, :, 0]
    q = self.yty - self.g * np.sum(v * w, axis=1)
    total = masks.sum(axis=1)
    prior = (gammaln(total + self.alpha_pi) +
             gammaln(self.D - total + self.beta_pi))
    return (prior + self.logdet_weight * (logdet1 - logdet2) -
            self.kappa * np.log(2.0 * self.beta_sigma + q))

  def _mask_grad(self, masks: np.ndarray) -> np.ndarray:
    m1, m2 = self._mask_parts(masks)
    sa = masks[:, :, None] * self.gram[None, :, :]
    d1 = 2.0 * np.diagonal(np.linalg.solve(m1, sa), axis1=1, axis2=2)
    d2 = 2.0 * (1.0 + self.g) * np.diagonal(
        np.linalg.solve(m2, sa), axis1=1, axis2=2)
    v = masks * self.xty[None, :]
    w = np.linalg.solve(m2, v[:, :, None])[:, :, 0]
    q = self.yty - self.g * np.sum(v * w, axis=1)
    a_sw = (masks * w) @ self.gram
    dq = -self.g * (2.0 * w * self.xty[None, :] -
                    2.0 * (1.0 + self.g) * w * a_sw)
    total = masks.sum(axis=1)
    dprior = (digamma(total + self.alpha_pi) -
              digamma(self.D - total + self.beta_pi))
    return (dprior[:, None] + self.logdet_weight * (d1 - d2) -
            self.kappa * dq / (2.0 * self.beta_sigma + q)[:, None])

  def _chunked(self, fn, masks: np.ndarray) -> np.ndarray:
    if masks.shape[0] <= self._CHUNK:
      return fn(masks)
    parts = [
        fn(masks[i:i + self._CHUNK])
        for i in range(0, masks.shape[0], self._CHUNK)
    ]
    return np.concatenate(parts, axis=0)

  def _padding_log_f(self, pad: np.ndarray) -> np.ndarray:
    return (pad.sum(axis=1) * np.log(self.rho_pad) +
            (self.n_padding - pad.sum(axis=1)) * np.log1p(-self.rho_pad))

  def _log_f(self, states):
    masks, pad = states[:, :self.D], states[:, self.D:]
    return self._chunked(self._mask_log_f, masks) + self._padding_log_f(pad)

  def _grad_f(self, states):
    grad = np.empty_like(states)
    grad[:, :self.D] = self._chunked(self._mask_grad, states[:, :self.D])
    grad[:, self.D:] = self.pad_logit
    return grad

  def mask_log_f(self, masks: np.ndarray) -> np.ndarray:
    """f restricted to the covariate block (no padding term)."""
    masks = np.atleast_2d(np.asarray(masks, dtype=float))
    return self._chunked(self._mask_log_f, masks)

  def _mask_chunks(self, chunk: int):
    shifts = np.arange(self.D - 1, -1, -1)
    for start in range(0, 2**self.D, chunk):
      ints = np.arange(start, min(start + chunk, 2**self.D))
      yield ((ints[:, None] >> shifts) & 1).astype(float)

  def exact_moments(self, cap: int = 2**20,
                    chunk: int = 65536) -> tuple[np.ndarray, np.ndarray]:
    """E[s_i] and E[s_i s_j] over all dimensions.

    The covariate block is enumerated in chunks; padding coordinates are
    independent with mean rho_pad.
    """
    if 2**self.D > cap:
      raise EnumerationLimitError(2**self.D, cap)
    log_f = np.concatenate([self.mask_log_f(m) for m in self._mask_chunks(chunk)])
    log_z = logsumexp(log_f)
    p1 = np.zeros(self.D)
    p11 = np.zeros((self.D, self.D))
    offset = 0
    for masks in self._mask_chunks(chunk):
      w = np.exp(log_f[offset:offset + masks.shape[0]] - log_z)
      offset += masks.shape[0]
      p1 += w @ masks
      p11 += (masks * w[:, None]).T @ masks
    logger.info('Enumerated %s covariate masks', 2**self.D)
    mean = np.full(self.dim, self.rho_pad)
    mean[:self.D] = p1
    second = np.outer(mean, mean)
    second[:self.D, :self.D] = p11
    np.fill_diagonal(second, mean)
    return mean, second

  def exact_marginals(self, cap: int = 2**20) -> np.ndarray:
    """(dim, 2) exact marginals over {0, 1}."""
    mean, _ = self.exact_moments(cap)
    return np.stack([1.0 - mean, mean], axis=1)


def pairwise_from_moments(mean: np.ndarray, second: np.ndarray) -> np.ndarray:
  """(d, d, 2, 2) bivariate tables of binary {0, 1} variables."""
  d = mean.size
  table = np.empty((d, d, 2, 2))
  table[:, :, 1, 1] = second
  table[:, :, 1, 0] = mean[:, None] - second
  table[:, :, 0, 1] = mean[None, :] - second
  table[:, :, 0, 0] = 1.0 - mean[:, None] - mean[None, :] + second
  return table


def sparse_regression_log_f(t: SparseRegressionPosterior, s: np.ndarray):
  return t.log_f(s)


def sparse_regression_grad_f(t: SparseRegressionPosterior, s: np.ndarray):
  return t.grad_f(s)


def make_regression_dataset(
    rng: np.random.Generator,
    n_obs: int = 20,
    n_base: int = 5,
    n_covariates: int = 20) -> tuple[np.ndarray, np.ndarray]:
  """Design matrix with duplicated covariates and y = sum of the base ones.

  Base covariates are i.i.d. uniform over {0, 1, 2}; covariate j (1-based,
  j > n_base) copies covariate (j mod n_base) + 1.
  """
  base = rng.integers(0, 3, size=(n_obs, n_base)).astype(float)
  X = np.empty((n_obs, n_covariates))
  X[:, :n_base] = base
  for j in range(n_base + 1, n_covariates + 1):
    X[:, j - 1] = base[:, j % n_base]
  y = base.sum(axis=1)
  return X, y


def regression_frame(X: np.ndarray, y: np.ndarray) -> pd.DataFrame:
  df = pd.DataFrame(X, columns=[f'x_{j + 1}' for j in range(X.shape[1])])
  df['y'] = y
  return df


def make_target(cfg, rng: np.random.Generator | None = None):
  """Build a target from a TargetConfig."""
  rng = rng or np.random.default_rng(cfg.seed)
  kind = cfg.kind
  if kind == 'ising':
    return make_lattice_ising(cfg.rows, cfg.cols, cfg.theta, cfg.circular)
  if kind == 'random_ising':
    return random_ising(cfg.dims, rng, cfg.scale)
  if kind in ('poly2', 'poly4'):
    return make_ordinal_mixture(kind, cfg.dims, cfg.n_points, cfg.lo, cfg.hi,
                                cfg.n_components)
  if kind == 'regression':
    X, y = make_regression_dataset(rng, cfg.n_obs, cfg.n_base,
                                   cfg.n_covariates)
    return SparseRegressionPosterior(
        X,
        y,
        alpha_pi=cfg.alpha_pi,
        beta_pi=cfg.beta_pi,
        g=cfg.g,
        lam=cfg.lam,
        alpha_sigma=cfg.alpha_sigma,
        beta_sigma=cfg.beta_sigma,
        n_padding=cfg.n_padding,
        rho_pad=cfg.rho_pad,
        logdet_weight=cfg.logdet_weight)
  raise ValueError(f'Unknown target kind {kind}')
