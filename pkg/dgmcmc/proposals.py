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

Proposal distributions.

Factorized proposals (NCG, AVG, PAVG) have per-dimension logits
a_i s + b_i s^2 over the support. Single-site proposals (GWG and its
ordinal extension) put a first-order Taylor weight on every move that
changes exactly one factor. All builders accept a batch of states with
shape (..., dim).
"""

from dataclasses import dataclass, field
import numpy as np
from scipy.special import logsumexp

from logger import logger
from state_spaces import StateSpace
from utils import log_normalize, sample_categorical

logger = logger.getChild('proposals')


def _check_eps(eps: float):
  if not eps > 0:
    raise ValueError(f'Step size must be positive, got {eps}')


@dataclass
class FactorizedProposal:
  """prod_i softmax over S of (a_i s + b_i s^2).

  For categorical spaces a and b are flat over the one-hot coordinates and
  the logit of option j in group g is a[g*k + j] + b[g*k + j].
  """
  a: np.ndarray
  b: np.ndarray
  space: StateSpace
  log_probs: np.ndarray = field(init=False, repr=False)

  def __post_init__(self):
    self.a = np.asarray(self.a, dtype=float)
    self.b = np.broadcast_to(np.asarray(self.b, dtype=float), self.a.shape)
    self.log_probs = log_normalize(self.logits(), axis=-1)

  def logits(self) -> np.ndarray:
    """Unnormalized logits, shape (..., n_factors, k)."""
    if self.space.is_categorical:
      return (self.a + self.b).reshape(self.a.shape[:-1] +
                                       (-1, self.space.group_size))
    grid = self.space.grid
    return self.a[..., None] * grid + self.b[..., None] * grid**2

  @property
  def log_partition(self) -> np.ndarray:
    """Per-factor log normalizers, shape (..., n_factors)."""
    return logsumexp(self.logits(), axis=-1)


def build_ncg(s_t: np.ndarray, grad: np.ndarray, eps: float,
              space: StateSpace) -> FactorizedProposal:
  _check_eps(eps)
  s_t = np.asarray(s_t, dtype=float)
  a = 0.5 * np.asarray(grad) + s_t / eps
  return FactorizedProposal(a, np.full_like(a, -1.0 / (2.0 * eps)), space)


def build_avg(s_t: np.ndarray, grad: np.ndarray, z_t: np.ndarray, eps: float,
              space: StateSpace) -> FactorizedProposal:
  """Proposal given the auxiliary z_t ~ N(sqrt(2/eps) s_t, I)."""
  _check_eps(eps)
  z_t = np.asarray(z_t, dtype=float)
  if z_t.shape != np.shape(s_t):
    raise ValueError(f'Auxiliary shape {z_t.shape} does not match '
                     f'{np.shape(s_t)}')
  a = np.asarray(grad) + np.sqrt(2.0 / eps) * z_t
  return FactorizedProposal(a, np.full_like(a, -1.0 / eps), space)


def build_pavg(s_t: np.ndarray, grad: np.ndarray, z_t: np.ndarray, pre,
               space: StateSpace) -> FactorizedProposal:
  """Preconditioned proposal; `pre` is a PreconditionerState.

  a = grad - (gamma Sigma) s_t + Sigma_eps^{1/2} z_t, b = -d_eps / 2.
  """
  pre.ensure_fresh()
  s_t = np.asarray(s_t, dtype=float)
  a = np.asarray(grad) - pre.drift(s_t) + pre.transform(z_t)
  return FactorizedProposal(a, np.full_like(a, -pre.d_eps / 2.0), space)


def sample(p: FactorizedProposal, rng: np.random.Generator) -> np.ndarray:
  """Independent per-factor draws; one uniform per factor."""
  idx = sample_categorical(p.log_probs, rng)
  return p.space.from_indices(idx)


def log_pmf(p: FactorizedProposal, s: np.ndarray) -> np.ndarray:
  """log q(s); broadcasts a single proposal against a batch of states."""
  idx = p.space.to_indices(s)
  log_probs = np.broadcast_to(p.log_probs, idx.shape + (p.log_probs.shape[-1],))
  picked = np.take_along_axis(log_probs, idx[..., None], axis=-1)[..., 0]
  return picked.sum(axis=-1)


@dataclass
class SingleSiteProposal:
  """Distribution over moves (factor, value index) that change one factor.

  `log_probs` has shape (..., n_factors, k) and is normalized over the last
  two axes; disallowed cells, including the current value, hold -inf.
  """
  log_weights: np.ndarray
  current: np.ndarray
  space: StateSpace
  log_normalizer: np.ndarray = field(init=False)
  log_probs: np.ndarray = field(init=False, repr=False)

  def __post_init__(self):
    self.log_normalizer = logsumexp(self.log_weights, axis=(-2, -1))
    self.log_probs = (
        self.log_weights - self.log_normalizer[..., None, None])

  @property
  def n_moves(self) -> np.ndarray:
    return np.isfinite(self.log_weights).sum(axis=(-2, -1))

  def log_prob(self, factor: np.ndarray, value: np.ndarray) -> np.ndarray:
    """log q of moving `factor` to support index `value`, per chain."""
    lead = self.log_probs.shape[:-2]
    flat = self.log_probs.reshape((-1,) + self.log_probs.shape[-2:])
    rows = np.arange(flat.shape[0])
    res = flat[rows, np.ravel(factor), np.ravel(value)]
    return res.reshape(lead)

  def sample(self, rng: np.random.Generator):
    """Draw a move per chain.

    Returns:
      (new states, moved factor, new value index, old value index)
    """
    k = self.log_probs.shape[-1]
    flat = self.log_probs.reshape(self.log_probs.shape[:-2] + (-1,))
    choice = sample_categorical(flat, rng)
    factor, value = np.divmod(choice, k)
    indices = self.current.copy()
    old = np.take_along_axis(indices, factor[..., None], axis=-1)[..., 0]
    np.put_along_axis(indices, factor[..., None], value[..., None], axis=-1)
    return self.space.from_indices(indices), factor, value, old


def build_local(s_t: np.ndarray,
                grad: np.ndarray,
                space: StateSpace,
                radius: int | None = None) -> SingleSiteProposal:
  """First-order locally informed proposal over single-factor moves.

  Every move gets log-weight 1/2 grad^T (s' - s_t). With `radius` set only
  values 1..radius grid indices away are reachable (ordinal spaces).
  """
  s_t = np.asarray(s_t, dtype=float)
  grad = np.asarray(grad, dtype=float)
  current = space.to_indices(s_t)
  k = space.k
  options = np.arange(k)
  if space.is_categorical:
    g = grad.reshape(grad.shape[:-1] + (-1, k))
    g_cur = np.take_along_axis(g, current[..., None], axis=-1)
    log_w = 0.5 * (g - g_cur)
  else:
    delta = space.grid - s_t[..., None]
    log_w = 0.5 * grad[..., None] * delta
  offset = np.abs(options - current[..., None])
  allowed = offset > 0
  if radius is not None:
    if radius < 1:
      raise ValueError(f'Radius must be >= 1, got {radius}')
    allowed &= offset <= radius
  log_w = np.where(allowed, log_w, -np.inf)
  return SingleSiteProposal(log_w, current, space)


def build_gwg(s_t: np.ndarray, grad: np.ndarray,
              space: StateSpace) -> SingleSiteProposal:
  return build_local(s_t, grad, space)


def build_ordinal_gwg(s_t: np.ndarray, grad: np.ndarray, r: int,
                      space: StateSpace) -> SingleSiteProposal:
  if space.is_categorical:
    raise ValueError('Ordinal GWG needs an ordered support')
  return build_local(s_t, grad, space, radius=r)


@dataclass
class UniformBallProposal:
  """Uniform over the index box [cur - r, cur + r] clipped to the lattice."""
  lo: np.ndarray
  hi: np.ndarray
  space: StateSpace

  @property
  def log_size(self) -> np.ndarray:
    """log of the exact number of states in the support."""
    return np.log(self.hi - self.lo + 1).sum(axis=-1)

  def sample(self, rng: np.random.Generator) -> np.ndarray:
    idx = rng.integers(self.lo, self.hi, endpoint=True)
    return self.space.from_indices(idx)

  def contains(self, states: np.ndarray) -> np.ndarray:
    idx = self.space.to_indices(states)
    return np.all((idx >= self.lo) & (idx <= self.hi), axis=-1)


def build_uniform_ball(s_t: np.ndarray, r: int,
                       space: StateSpace) -> UniformBallProposal:
  if space.is_categorical:
    raise ValueError('MH-uniform needs an ordered support')
  if r < 1:
    raise ValueError(f'Radius must be >= 1, got {r}')
  current = space.to_indices(s_t)
  return UniformBallProposal(
      np.maximum(current - r, 0), np.minimum(current + r, space.k - 1), space)
