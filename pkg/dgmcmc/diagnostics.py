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

Evaluation metrics, step-size tuning and exact small-instance oracles.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Sequence
import numpy as np
import pandas as pd
from scipy.special import logsumexp, rel_entr
from sklearn.covariance import empirical_covariance
from statsmodels.tsa.stattools import acf

from logger import logger
import preconditioning
import samplers
from samplers import SamplerConfig, SamplerKind
from state_spaces import (ChainEnsemble, StateSpace, enumerate_states,
                          make_ordinal_grid, random_states)
import targets

logger = logger.getChild('diagnostics')


class OracleCheckFailed(AssertionError):
  """An exact invariant did not hold."""


@dataclass
class MetricReport:
  """Metrics of one evaluation checkpoint."""
  marginal_error: float
  acceptance_rate: float
  mean_l1_jump: float
  ess_per_chain: np.ndarray = field(default_factory=lambda: np.empty(0))
  covariance_error: float | None = None
  pairwise_error: float | None = None

  def validate(self):
    values = [self.marginal_error, self.acceptance_rate, self.mean_l1_jump]
    values += [
        v for v in (self.covariance_error, self.pairwise_error) if v is not None
    ]
    values += list(np.ravel(self.ess_per_chain))
    for v in values:
      if not np.isfinite(v) or v < 0:
        raise ValueError(f'Metric value {v} is not finite and non-negative')

  def to_dict(self) -> dict:
    res = asdict(self)
    ess = np.asarray(self.ess_per_chain, dtype=float)
    res['ess_per_chain'] = ess
    res['ess_mean'] = float(ess.mean()) if ess.size else float('nan')
    return res


def _flatten_history(history: np.ndarray) -> np.ndarray:
  history = np.asarray(history, dtype=float)
  if history.ndim == 3:
    return history.reshape(-1, history.shape[-1])
  return np.atleast_2d(history)


def empirical_marginals(history: np.ndarray, space: StateSpace) -> np.ndarray:
  """(n_factors, k) frequencies of each support value per factor."""
  idx = space.to_indices(_flatten_history(history))
  counts = np.stack(
      [np.bincount(idx[:, i], minlength=space.k) for i in range(idx.shape[1])])
  return counts / idx.shape[0]


def marginal_kl(history: np.ndarray, exact_marginals: np.ndarray,
                space: StateSpace) -> float:
  """(1/d) sum_i KL(q_i || p_i) with q_i the empirical marginals.

  Empty empirical cells contribute zero. Exact cells with zero mass that the
  chains visited are smoothed with 1 / (n_samples * k).
  """
  flat = _flatten_history(history)
  q = empirical_marginals(flat, space)
  p = np.asarray(exact_marginals, dtype=float)
  if p.shape != q.shape:
    raise ValueError(f'Exact marginals have shape {p.shape}, expected {q.shape}')
  if np.any((p == 0) & (q > 0)):
    smooth = 1.0 / (flat.shape[0] * space.k)
    p = (p + smooth) / (1.0 + space.k * smooth)
  return float(np.mean(rel_entr(q, p).sum(axis=1)))


def marginal_abs_error(history: np.ndarray, exact_p1: np.ndarray) -> float:
  """(1/d) sum_i |q_i(1) - p_i(1)| for binary coordinates."""
  flat = _flatten_history(history)
  return float(np.mean(np.abs(flat.mean(axis=0) - np.asarray(exact_p1))))


def covariance_error(history: np.ndarray,
                     reference_samples: np.ndarray | None = None,
                     reference_cov: np.ndarray | None = None) -> float:
  """Frobenius distance between empirical and reference covariances."""
  if reference_cov is None:
    if reference_samples is None:
      raise ValueError('Need reference samples or a reference covariance')
    reference_cov = empirical_covariance(_flatten_history(reference_samples))
  cov = empirical_covariance(_flatten_history(history))
  return float(np.linalg.norm(cov - reference_cov, ord='fro'))


def empirical_pairwise(history: np.ndarray, space: StateSpace) -> np.ndarray:
  """(m, m, k, k) empirical bivariate marginals."""
  idx = space.to_indices(_flatten_history(history))
  if space.k == 2:
    ind = idx.astype(float)
    return targets.pairwise_from_moments(
        ind.mean(axis=0), ind.T @ ind / idx.shape[0])
  onehot = np.eye(space.k)[idx]
  return np.einsum('nia,njb->ijab', onehot, onehot) / idx.shape[0]


def pairwise_error(history: np.ndarray, exact_pairwise: np.ndarray,
                   space: StateSpace) -> float:
  """(1/d^2) sum_{i,j} sum_{cells} |q_ij - p_ij|."""
  q = empirical_pairwise(history, space)
  m = q.shape[0]
  return float(np.abs(q - exact_pairwise).sum() / m**2)


def l1_statistic(history: np.ndarray, reference: np.ndarray) -> np.ndarray:
  """||s - reference||_1 per step and chain, (n_steps, n_chains)."""
  return np.abs(np.asarray(history) - reference).sum(axis=-1)


def _ess_from_autocorrelation(rho: np.ndarray, n: int) -> float:
  """n / tau with tau summed over the initial positive sequence.

  Pair sums rho_{2t} + rho_{2t+1} are accumulated until the first
  non-positive one after the first pair; tau = 2 * sum(pairs) - 1. tau is
  floored at 1 / log10(n) so anticorrelated chains stay bounded.
  """
  n_pairs = len(rho) // 2
  pairs = rho[:2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
  nonpos = np.nonzero(pairs[1:] <= 0)[0]
  if nonpos.size:
    pairs = pairs[:nonpos[0] + 1]
  tau = 2.0 * pairs.sum() - 1.0
  floor = 1.0 / np.log10(n) if n > 10 else 1.0
  return n / max(tau, floor)


def ess(traces: np.ndarray) -> np.ndarray:
  """Per-chain effective sample size of a (n_steps, n_chains) statistic.

  n / (1 + 2 sum_k rho_k) with the initial positive sequence truncation.
  A constant chain gets ESS 0.
  """
  traces = np.asarray(traces, dtype=float)
  if traces.ndim == 1:
    traces = traces[:, None]
  n, n_chains = traces.shape
  res = np.zeros(n_chains)
  for c in range(n_chains):
    x = traces[:, c]
    if n < 2 or np.all(x == x[0]):
      logger.warning('Chain %s has a constant trace, ESS set to 0', c)
      continue
    rho = acf(x, nlags=n - 1, adjusted=False, fft=True)
    res[c] = _ess_from_autocorrelation(rho, n)
  return res


def ess_brute_force(traces: np.ndarray) -> np.ndarray:
  """Same estimator with autocorrelations summed lag by lag."""
  traces = np.asarray(traces, dtype=float)
  if traces.ndim == 1:
    traces = traces[:, None]
  n, n_chains = traces.shape
  res = np.zeros(n_chains)
  for c in range(n_chains):
    x = traces[:, c] - traces[:, c].mean()
    var = float(x @ x)
    if n < 2 or var == 0:
      continue
    rho = np.array([x[:n - k] @ x[k:] / var for k in range(n)])
    res[c] = _ess_from_autocorrelation(rho, n)
  return res


def summarize_across_chains(values: np.ndarray) -> dict:
  """Mean, standard error and quartiles of per-chain values."""
  values = np.asarray(values, dtype=float)
  n = values.size
  stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
  q25, median, q75 = np.percentile(values, [25, 50, 75]) if n else (np.nan,) * 3
  return {
      'mean': float(values.mean()) if n else float('nan'),
      'stderr': stderr,
      'median': float(median),
      'q25': float(q25),
      'q75': float(q75),
  }


class TuningResult(NamedTuple):
  value: float
  scores: dict


def _mean_jump(target, config: SamplerConfig, n_steps: int, n_chains: int,
               seed: int, threads: int) -> float:
  if config.kind == SamplerKind.PAVG and config.preconditioner is None:
    config.preconditioner = preconditioning.PreconditionerState.zero(
        target.dim, config.eps)
  ensemble = ChainEnsemble.random(target, n_chains, seed)
  trace = samplers.run_chain(
      target, config, n_steps, ensemble, record_states=False, threads=threads)
  return trace.mean_l1_jump


def tune_step_size(target,
                   sampler_kind: SamplerKind | str,
                   candidate_grid: Sequence[float] | None = None,
                   n_steps: int = 500,
                   n_chains: int = 10,
                   seed: int = 0,
                   threads: int = 1,
                   refine: bool = True) -> TuningResult:
  """Grid search maximizing the mean L1 distance between successive states.

  Step sizes get an order-of-magnitude scan refined over the deciles around
  the best value; radii get a coarse scan refined in unit steps.
  """
  kind = SamplerKind(sampler_kind)
  uses_radius = kind in samplers.RADIUS_KINDS
  if kind not in samplers.RADIUS_KINDS + samplers.STEP_SIZE_KINDS:
    raise ValueError(f'Sampler {kind.value} has no tunable step size')
  if candidate_grid is None:
    candidate_grid = [1, 5, 10, 15, 20] if uses_radius else [
        10.0**e for e in range(-3, 4)
    ]
  scores = {}

  def score(value):
    if value in scores:
      return scores[value]
    cfg = SamplerConfig(
        kind, radius=value) if uses_radius else SamplerConfig(kind, eps=value)
    scores[value] = _mean_jump(target, cfg, n_steps, n_chains, seed, threads)
    logger.info('Tuning %s: %s -> mean jump %.5f', kind.value, value,
                scores[value])
    return scores[value]

  best = max(candidate_grid, key=score)
  if refine and len(candidate_grid) > 1:
    if uses_radius:
      fine = [r for r in range(best - 4, best + 5) if r >= 1]
    else:
      fine = [best * j / 10 for j in range(1, 10)] + [
          best * j for j in range(1, 10)
      ]
    best = max(fine, key=score)
  return TuningResult(best, scores)


@dataclass
class ExactOracle:
  """Everything computable by enumerating S^d."""
  target: object
  states: np.ndarray
  log_f: np.ndarray
  grad: np.ndarray
  log_normalizer: float
  probs: np.ndarray
  marginals: np.ndarray
  pairwise: np.ndarray

  def transition_matrix(
      self,
      config: SamplerConfig,
      acceptance: Callable[[np.ndarray], np.ndarray] | None = None
  ) -> np.ndarray:
    n = self.states.shape[0]
    P = np.empty((n, n))
    for i in range(n):
      P[i] = samplers.transition_row(self.target, config, i, self.states,
                                     self.log_f, self.grad, acceptance)
    return P

  def stationarity_error(self, P: np.ndarray) -> float:
    """||pi P - pi||_inf."""
    return float(np.max(np.abs(self.probs @ P - self.probs)))

  def detailed_balance_error(self, P: np.ndarray) -> float:
    flow = self.probs[:, None] * P
    return float(np.max(np.abs(flow - flow.T)))


def exact_oracle(target, cap: int = 4096) -> ExactOracle:
  """Enumerate the target's lattice (at most `cap` states)."""
  space = target.space
  states = enumerate_states(space, target.n_factors, cap)
  log_f, grad = target.log_f_and_grad(states)
  log_z = float(logsumexp(log_f))
  probs = np.exp(log_f - log_z)
  onehot = np.eye(space.k)[space.to_indices(states)]
  marginals = np.einsum('n,nia->ia', probs, onehot)
  pairwise = np.einsum('n,nia,njb->ijab', probs, onehot, onehot)
  return ExactOracle(target, states, log_f, grad, log_z, probs, marginals,
                     pairwise)


@dataclass
class OracleResult:
  suite: str
  check: str
  value: float
  threshold: float
  passed: bool
  expect_failure: bool = False


def _result(suite, check, value, threshold, expect_failure=False):
  ok = value < threshold
  passed = not ok if expect_failure else ok
  level = logging.INFO if passed else logging.ERROR
  logger.log(level, '[%s] %s: %.3g (threshold %.0e) %s', suite, check, value,
             threshold, 'ok' if passed else 'FAILED')
  return OracleResult(suite, check, value, threshold, passed, expect_failure)


def stationarity_suite(seed: int = 0,
                       tol: float = 1e-10,
                       corrupt: bool = True) -> list[OracleResult]:
  """pi P = pi for every finite-state kernel on small targets."""
  rng = np.random.default_rng(seed)
  ising = targets.random_ising(4, rng)
  ordinal = targets.OrdinalPolyMixture(
      make_ordinal_grid(5, -1.5, 3.0), 2, 'poly2', n_components=50)
  kernels = [
      SamplerConfig('gibbs', scan='random'),
      SamplerConfig('gwg'),
      SamplerConfig('ordinal_gwg', radius=2),
      SamplerConfig('mh_uniform', radius=1),
      SamplerConfig('ncg', eps=0.5),
  ]
  results = []
  for name, target in (('ising_d4', ising), ('ordinal_d2_k5', ordinal)):
    oracle = exact_oracle(target)
    for cfg in kernels:
      P = oracle.transition_matrix(cfg)
      results.append(
          _result('stationarity', f'{name}/{cfg.name}',
                  oracle.stationarity_error(P), tol))
      results.append(
          _result('row_sums', f'{name}/{cfg.name}',
                  float(np.max(np.abs(P.sum(axis=1) - 1))), 1e-12))
    if corrupt:
      P = oracle.transition_matrix(SamplerConfig('gwg'), acceptance=np.sqrt)
      results.append(
          _result(
              'negative_control',
              f'{name}/gwg_corrupted',
              oracle.stationarity_error(P),
              tol,
              expect_failure=True))
  return results


def pavg_exactness_suite(seed: int = 0,
                         dim: int = 20,
                         n_pairs: int = 10_000,
                         tol: float = 1e-8) -> list[OracleResult]:
  """PAVG on a quadratic target with Sigma = J accepts every move."""
  rng = np.random.default_rng(seed)
  target = targets.random_quadratic(dim, rng)
  pre = preconditioning.PreconditionerState.create(target.J, eps=1.0)
  ensemble = ChainEnsemble.random(target, n_pairs, seed)
  block = ensemble.blocks[0]
  out = samplers.pavg_step(target, block, pre, block.rng)
  return [
      _result('pavg_exactness', f'quadratic_d{dim}',
              float(np.max(np.abs(out.log_accept_ratio))), tol)
  ]


def gradient_suite(seed: int = 0,
                   n_points: int = 100,
                   tol: float = 1e-4) -> list[OracleResult]:
  """Finite-difference checks of every target family."""
  rng = np.random.default_rng(seed)
  X, y = targets.make_regression_dataset(rng)
  families = {
      'ising': targets.make_lattice_ising(3, 3, 0.2, True),
      'poly2': targets.make_ordinal_mixture('poly2', dim=5),
      'poly4': targets.make_ordinal_mixture('poly4', dim=5),
      'regression': targets.SparseRegressionPosterior(X, y, n_padding=5),
  }
  results = []
  for name, target in families.items():
    points = random_states(target.space, target.n_factors, n_points, rng)
    worst = max(
        targets.gradient_relative_error(target, p, h=1e-5) for p in points)
    results.append(_result('gradient', name, worst, tol))
  return results


def run_oracle_suites(seed: int = 0) -> list[OracleResult]:
  started = time.monotonic()
  results = (
      stationarity_suite(seed) + pavg_exactness_suite(seed) +
      gradient_suite(seed))
  logger.info('Oracle suites finished in %.1fs', time.monotonic() - started)
  return results


def oracle_frame(results: list[OracleResult]) -> pd.DataFrame:
  return pd.DataFrame([asdict(r) for r in results])


def assert_passed(results: list[OracleResult]):
  failed = [r for r in results if not r.passed]
  if failed:
    names = ', '.join(f'{r.suite}/{r.check}' for r in failed)
    raise OracleCheckFailed(f'{len(failed)} oracle checks failed: {names}')
