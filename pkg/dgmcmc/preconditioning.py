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

Global preconditioner for PAVG and its online adaptation.
"""

import dataclasses
import json
import zlib
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence
import numpy as np
import smart_open
from scipy import linalg
from sklearn.covariance import empirical_covariance

from logger import logger
import samplers
from state_spaces import ChainEnsemble

logger = logger.getChild('preconditioning')


class StalePreconditionerError(RuntimeError):
  """The cached eigendecomposition does not match (gamma, Sigma, eps)."""

  def __init__(self, msg=None) -> None:
    super().__init__(msg or 'Preconditioner changed since its square root '
                     'was computed, call refresh_sqrt first')


class DegenerateFitError(ValueError):
  """Not enough informative history to fit Sigma."""


def _fingerprint(Sigma: np.ndarray, gamma: float, eps: float):
  return (float(gamma), float(eps), Sigma.shape,
          zlib.crc32(np.ascontiguousarray(Sigma).tobytes()))


@dataclass
class PreconditionerState:
  """gamma * Sigma with its shifted symmetric square root.

  Build through `create` or `refresh_sqrt`; mutating Sigma, gamma or eps
  afterwards makes the state stale until refreshed.
  """
  Sigma: np.ndarray
  eps: float
  gamma: float = 1.0
  gamma_old: float = 1.0
  delta: float = 0.25
  rho: float = 0.99
  eigenvalues: np.ndarray = field(default=None, repr=False)
  eigenvectors: np.ndarray = field(default=None, repr=False)
  d_eps: float = 0.0
  Sigma_eps_sqrt: np.ndarray = field(default=None, repr=False)
  isotropic: bool = False
  """True when gamma * Sigma == 0 and the square root is a multiple of I."""
  _key: tuple = field(default=None, repr=False)

  @classmethod
  def create(cls, Sigma: np.ndarray, eps: float, **kw) -> 'PreconditionerState':
    if not eps > 0:
      raise ValueError(f'Step size must be positive, got {eps}')
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1]:
      raise ValueError(f'Sigma must be square, got shape {Sigma.shape}')
    return refresh_sqrt(cls(Sigma=0.5 * (Sigma + Sigma.T), eps=eps, **kw))

  @classmethod
  def zero(cls, dim: int, eps: float, **kw) -> 'PreconditionerState':
    return cls.create(np.zeros((dim, dim)), eps, **kw)

  @property
  def dim(self) -> int:
    return self.Sigma.shape[0]

  @property
  def scaled(self) -> np.ndarray:
    return self.gamma * self.Sigma

  @property
  def lambda_min(self) -> float:
    return float(self.eigenvalues.min())

  def is_fresh(self) -> bool:
    return self._key == _fingerprint(self.Sigma, self.gamma, self.eps)

  def ensure_fresh(self):
    if not self.is_fresh():
      raise StalePreconditionerError()

  def drift(self, s: np.ndarray) -> np.ndarray:
    """(gamma Sigma) s for a batch of row vectors."""
    if self.isotropic:
      return np.zeros_like(s)
    return s @ self.scaled

  def transform(self, z: np.ndarray) -> np.ndarray:
    """Sigma_eps^{1/2} z for a batch of row vectors."""
    if self.isotropic:
      return np.sqrt(self.d_eps) * z
    return z @ self.Sigma_eps_sqrt

  def with_gamma(self, gamma: float, gamma_old: float) -> 'PreconditionerState':
    return refresh_sqrt(
        dataclasses.replace(self, gamma=gamma, gamma_old=gamma_old))

  def header(self) -> dict:
    return {
        'gamma': self.gamma,
        'gamma_old': self.gamma_old,
        'eps': self.eps,
        'd_eps': self.d_eps,
        'delta': self.delta,
        'rho': self.rho,
        'dim': self.dim,
    }


def refresh_sqrt(state: PreconditionerState) -> PreconditionerState:
  """New state with the eigendecomposition of gamma * Sigma recomputed.

  d_eps = max(0, -lambda_min) + 2 / eps and
  Sigma_eps^{1/2} = V diag(sqrt(lambda + d_eps)) V^T.
  """
  state = dataclasses.replace(state)
  scaled = state.scaled
  dim = scaled.shape[0]
  if not np.any(scaled):
    state.eigenvalues = np.zeros(dim)
    state.eigenvectors = np.eye(dim)
    state.d_eps = 2.0 / state.eps
    state.Sigma_eps_sqrt = np.sqrt(state.d_eps) * np.eye(dim)
    state.isotropic = True
  else:
    w, V = linalg.eigh(0.5 * (scaled + scaled.T))
    state.eigenvalues = w
    state.eigenvectors = V
    state.d_eps = max(0.0, -float(w.min())) + 2.0 / state.eps
    roots = np.sqrt(np.maximum(w + state.d_eps, 0.0))
    state.Sigma_eps_sqrt = (V * roots) @ V.T
    state.isotropic = False
  state._key = _fingerprint(state.Sigma, state.gamma, state.eps)
  return state


def adapt_gamma(gamma: float, gamma_old: float, delta: float, jump_new: float,
                jump_old: float) -> tuple[float, float]:
  """One round of the jump-distance adaptation of gamma.

  Keeps moving gamma in the same direction while the mean jump improves and
  reverses otherwise; multiplicative steps for |gamma| >= 1, additive below.

  Returns:
    (new gamma, previous gamma)
  """
  increased = gamma >= gamma_old
  improved = jump_new >= jump_old
  adjustment = delta if increased == improved else -delta
  if abs(gamma) >= 1:
    new_gamma = gamma * (1.0 + adjustment)
  else:
    new_gamma = gamma + adjustment
  return new_gamma, gamma


@dataclass
class AdaptationHistory:
  """Burn-in snapshots plus per-step mean jumps split into windows."""
  window: int
  states: list[np.ndarray] = field(default_factory=list, repr=False)
  logf: list[np.ndarray] = field(default_factory=list, repr=False)
  grad: list[np.ndarray] = field(default_factory=list, repr=False)
  jumps: list[float] = field(default_factory=list)

  def append_snapshot(self, ensemble: ChainEnsemble):
    self.states.append(ensemble.states.copy())
    self.logf.append(ensemble.logf.copy())
    self.grad.append(ensemble.grad.copy())

  def record_jump(self, mean_jump: float):
    self.jumps.append(float(mean_jump))

  @property
  def n_complete_windows(self) -> int:
    return len(self.jumps) // self.window

  def last_two_windows(self) -> tuple[float, float]:
    """(mean jump of the previous window, mean jump of the latest)."""
    if self.n_complete_windows < 2:
      raise ValueError('Two complete windows are needed')
    end = self.n_complete_windows * self.window
    latest = self.jumps[end - self.window:end]
    previous = self.jumps[end - 2 * self.window:end - self.window]
    return float(np.mean(previous)), float(np.mean(latest))

  def samples(self) -> np.ndarray:
    """All snapshot states pooled over chains, (n_snapshots*n_chains, dim)."""
    return np.concatenate(self.states, axis=0)

  def adjacent_pairs(self):
    """Consecutive (s_t, s_t+1) of every chain with f and grad f at s_t.

    Returns:
      (s, s_next, f, f_next, grad) pooled over chains and time.
    """
    if len(self.states) < 2:
      raise DegenerateFitError('History holds fewer than two snapshots')
    s = np.concatenate(self.states[:-1])
    s_next = np.concatenate(self.states[1:])
    f = np.concatenate(self.logf[:-1])
    f_next = np.concatenate(self.logf[1:])
    grad = np.concatenate(self.grad[:-1])
    return s, s_next, f, f_next, grad

  def clear_snapshots(self):
    self.states.clear()
    self.logf.clear()
    self.grad.clear()


def ebm_sigma_from_data(dataset: np.ndarray) -> dict[str, np.ndarray | None]:
  """Covariance and precision candidates from samples, one per row.

  The precision is the pseudo-inverse of the covariance with eigenvalues
  below 1e-8 * lambda_max discarded; it is None for a zero covariance.
  """
  dataset = np.asarray(dataset, dtype=float)
  cov = empirical_covariance(dataset)
  cov = 0.5 * (cov + cov.T)
  if not np.any(np.abs(cov) > 0):
    logger.warning('Samples have zero covariance, precision is unavailable')
    return {'covariance': cov, 'precision': None}
  prec = linalg.pinvh(cov, atol=0.0, rtol=1e-8)
  return {'covariance': cov, 'precision': 0.5 * (prec + prec.T)}


class SigmaFit(NamedTuple):
  Sigma: np.ndarray
  gamma0: float
  candidate: str
  residual: float


def fit_sigma(history: AdaptationHistory | tuple,
              candidates: Sequence[str] | Mapping[str, np.ndarray] = (
                  'covariance', 'precision')) -> SigmaFit:
  """Least-squares choice of Sigma and gamma0 from adjacent-state pairs.

  For every pair y = f(s') - f(s) - grad f(s)^T (s' - s) and
  x = 1/2 (s' - s)^T Sigma (s' - s); gamma0 = sum(xy) / sum(x^2). The
  candidate with the smallest residual wins.

  Args:
    history: an AdaptationHistory or the tuple its `adjacent_pairs` returns.
    candidates: names of candidates estimated from the history samples, or
      explicit matrices keyed by name.

  Returns:
    SigmaFit of the winning candidate.
  """
  if isinstance(history, AdaptationHistory):
    pairs = history.adjacent_pairs()
  else:
    pairs = history
  s, s_next, f, f_next, grad = pairs
  delta = s_next - s
  moved = np.any(delta != 0, axis=1)
  if moved.sum() < 2:
    raise DegenerateFitError(
        f'Need at least 2 pairs with a move, got {int(moved.sum())}')
  delta = delta[moved]
  y = f_next[moved] - f[moved] - np.sum(grad[moved] * delta, axis=1)

  if isinstance(candidates, Mapping):
    matrices = dict(candidates)
  else:
    if not isinstance(history, AdaptationHistory):
      raise ValueError('Named candidates need an AdaptationHistory')
    estimated = ebm_sigma_from_data(history.samples())
    matrices = {name: estimated[name] for name in candidates}

  best = None
  for name, Sigma in matrices.items():
    if Sigma is None:
      logger.warning('Candidate %s is unavailable, skipping', name)
      continue
    x = 0.5 * np.einsum('ni,ij,nj->n', delta, Sigma, delta)
    denom = float(x @ x)
    if denom == 0:
      logger.warning('Candidate %s gives no quadratic signal, skipping', name)
      continue
    gamma0 = float(x @ y) / denom
    residual = float(np.sum((y - gamma0 * x)**2))
    logger.info('Candidate %s: gamma0=%.6g residual=%.6g', name, gamma0,
                residual)
    if best is None or residual < best.residual:
      best = SigmaFit(np.asarray(Sigma, dtype=float), gamma0, name, residual)
  if best is None:
    raise DegenerateFitError('All Sigma candidates are degenerate')
  return best


@dataclass
class AdaptiveConfig:
  """Settings of the adaptive PAVG loop."""
  eps: float
  n_steps: int
  n_sigma: int = 1000
  n_adapt: int = 100
  delta: float = 0.25
  rho: float = 0.99
  gamma: float = 1.0
  candidates: tuple[str, ...] = ('covariance', 'precision')


class AdaptationResult(NamedTuple):
  preconditioner: PreconditionerState
  ensemble: ChainEnsemble
  trace: samplers.ChainTrace
  rounds: list[dict]


class _Adapter:
  """run_chain callback that fits Sigma and adapts gamma between steps."""

  def __init__(self, config: AdaptiveConfig, sampler: samplers.SamplerConfig,
               ensemble: ChainEnsemble):
    self.config = config
    self.sampler = sampler
    self.history = AdaptationHistory(window=config.n_adapt)
    self.rounds = []
    if config.n_sigma > 0:
      self.history.append_snapshot(ensemble)

  def __call__(self, step, ensemble, outcome):
    cfg = self.config
    pre = self.sampler.preconditioner
    if step <= cfg.n_sigma:
      self.history.append_snapshot(ensemble)
      if step == cfg.n_sigma:
        try:
          fit = fit_sigma(self.history, cfg.candidates)
        except DegenerateFitError as e:
          logger.warning('Sigma fit failed at step %s, keeping Sigma=0: %s',
                         step, e)
          self.history.clear_snapshots()
          return
        self.history.clear_snapshots()
        self.sampler.preconditioner = PreconditionerState.create(
            fit.Sigma,
            cfg.eps,
            gamma=fit.gamma0,
            gamma_old=fit.gamma0,
            delta=pre.delta,
            rho=pre.rho)
        self.rounds.append({
            'step': step,
            'event': 'fit',
            'candidate': fit.candidate,
            'gamma': fit.gamma0,
            'delta': pre.delta,
            'residual': fit.residual,
        })
        logger.info('Fitted Sigma (%s) at step %s, gamma0=%.6g',
                    fit.candidate, step, fit.gamma0)
      return
    self.history.record_jump(float(np.mean(outcome.l1_jump)))
    since = step - cfg.n_sigma
    if since % cfg.n_adapt or self.history.n_complete_windows < 2:
      return
    jump_old, jump_new = self.history.last_two_windows()
    gamma, gamma_old = adapt_gamma(pre.gamma, pre.gamma_old, pre.delta,
                                   jump_new, jump_old)
    new_pre = pre.with_gamma(gamma, gamma_old)
    new_pre.delta = pre.delta * pre.rho
    self.sampler.preconditioner = new_pre
    self.rounds.append({
        'step': step,
        'event': 'adapt',
        'candidate': '',
        'gamma': gamma,
        'delta': new_pre.delta,
        'residual': float('nan'),
    })
    logger.debug('Step %s: gamma %.6g -> %.6g (jumps %.4f -> %.4f)', step,
                 gamma_old, gamma, jump_old, jump_new)


def adaptive_loop(target,
                  config: AdaptiveConfig,
                  ensemble: ChainEnsemble,
                  thin: int = 1,
                  record_states: bool = True,
                  threads: int = 1,
                  callbacks=()) -> AdaptationResult:
  """PAVG with Sigma = 0 until n_sigma, then a fitted Sigma and adapted gamma.

  Before step n_sigma every snapshot goes into the history; at n_sigma
  Sigma and gamma0 come from `fit_sigma`; afterwards gamma is adapted every
  n_adapt steps once two full windows exist, decaying delta by rho.
  """
  pre = PreconditionerState.zero(
      target.dim,
      config.eps,
      gamma=config.gamma,
      gamma_old=config.gamma,
      delta=config.delta,
      rho=config.rho)
  sampler = samplers.SamplerConfig(
      kind=samplers.SamplerKind.PAVG,
      eps=config.eps,
      preconditioner=pre,
      preconditioner_source='adaptive')
  adapter = _Adapter(config, sampler, ensemble)
  trace = samplers.run_chain(
      target,
      sampler,
      config.n_steps,
      ensemble,
      callbacks=[adapter, *callbacks],
      thin=thin,
      record_states=record_states,
      threads=threads)
  return AdaptationResult(sampler.preconditioner, ensemble, trace,
                          adapter.rounds)


def save_preconditioner(state: PreconditionerState, path: str):
  """Write Sigma to `<path>.npy` and the scalars to `<path>.json`."""
  with smart_open.open(path + '.npy', 'wb') as f:
    np.save(f, state.Sigma)
  with smart_open.open(path + '.json', 'w') as f:
    json.dump(state.header(), f, indent=2)


def load_preconditioner(path: str) -> PreconditionerState:
  with smart_open.open(path + '.npy', 'rb') as f:
    Sigma = np.load(f)
  with smart_open.open(path + '.json', 'r') as f:
    header = json.load(f)
  return PreconditionerState.create(
      Sigma,
      header['eps'],
      gamma=header['gamma'],
      gamma_old=header['gamma_old'],
      delta=header['delta'],
      rho=header['rho'])
