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

Persistent contrastive divergence for Ising couplings.
"""

import time
from dataclasses import dataclass, field
import numpy as np
import pandas as pd

from logger import logger
from preconditioning import PreconditionerState, ebm_sigma_from_data
import samplers
from samplers import SamplerConfig, SamplerKind
from state_spaces import ChainEnsemble, random_states
from targets import IsingModel
from utils import format_elapsed, make_stream

logger = logger.getChild('learning')

# gradient-equivalent evaluations per step
SAMPLER_COSTS = {
    SamplerKind.NCG: 1.0,
    SamplerKind.AVG: 1.0,
    SamplerKind.PAVG: 1.0,
    SamplerKind.MH_UNIFORM: 1.0,
    SamplerKind.GWG: 2.0,
    SamplerKind.ORDINAL_GWG: 2.0,
}


def sampler_cost(config: SamplerConfig,
                 k: int = 2,
                 n_factors: int = 1) -> float:
  """Cost of one step in gradient-equivalent evaluations.

  A Gibbs site update costs k/2; a systematic sweep updates `n_factors`
  sites.
  """
  if config.kind == SamplerKind.GIBBS:
    sites = n_factors if config.scan == 'systematic' else 1
    return sites * k / 2.0
  return SAMPLER_COSTS[config.kind]


def budget_steps(config: SamplerConfig,
                 K: int,
                 k: int = 2,
                 multiplier: float | None = None,
                 n_factors: int = 1) -> int:
  """Steps of `config` that match K steps of a unit-cost sampler."""
  if multiplier is None:
    multiplier = 1.0 / sampler_cost(config, k, n_factors)
  return max(1, int(round(K * multiplier)))


@dataclass
class PcdConfig:
  n_iters: int = 2000
  n_batch: int = 50
  n_buffer: int = 5000
  K: int = 20
  """MCMC steps per update, in unit-cost steps."""
  lr: float = 0.0003
  l1_strength: float = 0.01
  optimizer: str = 'adam'
  sampler: SamplerConfig = field(
      default_factory=lambda: SamplerConfig(SamplerKind.NCG, eps=0.5))
  budget_multiplier: float | None = None
  checkpoint_every: int = 100
  chain_block: int | None = None
  threads: int = 1

  def validate(self):
    if self.n_batch > self.n_buffer:
      raise ValueError(f'Buffer of {self.n_buffer} is smaller than the batch '
                       f'of {self.n_batch}')
    if self.K < 1:
      raise ValueError(f'K must be >= 1, got {self.K}')
    if self.optimizer not in ('adam', 'sgd'):
      raise ValueError(f'Unknown optimizer {self.optimizer}')
    if self.n_iters < 0:
      raise ValueError('n_iters must be non-negative')


@dataclass
class IsingEstimate:
  J: np.ndarray
  b: np.ndarray
  J_true: np.ndarray

  @property
  def error(self) -> float:
    return float(np.linalg.norm(self.J - self.J_true, ord='fro'))


def ising_parameter_grad(states: np.ndarray) -> np.ndarray:
  """Mean of 1/2 s s^T over a batch with the diagonal zeroed."""
  states = np.atleast_2d(states)
  g = 0.5 * states.T @ states / states.shape[0]
  np.fill_diagonal(g, 0.0)
  return g


def pcd_gradient(model: IsingModel,
                 data_batch: np.ndarray,
                 buffer_batch: np.ndarray,
                 l1_strength: float = 0.01) -> np.ndarray:
  """Log-likelihood ascent direction for J with the L1 penalty.

  The subgradient of |J_ij| at 0 is taken as 0.
  """
  grad = ising_parameter_grad(data_batch) - ising_parameter_grad(buffer_batch)
  return grad - l1_strength * np.sign(model.J)


class Adam:
  """Adam ascent on a flat parameter vector."""

  def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    self.lr = lr
    self.beta1 = beta1
    self.beta2 = beta2
    self.eps = eps
    self.m = None
    self.v = None
    self.t = 0

  def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    if self.m is None:
      self.m = np.zeros_like(params)
      self.v = np.zeros_like(params)
    self.t += 1
    self.m = self.beta1 * self.m + (1 - self.beta1) * grad
    self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
    m_hat = self.m / (1 - self.beta1**self.t)
    v_hat = self.v / (1 - self.beta2**self.t)
    return params + self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Sgd:

  def __init__(self, lr: float):
    self.lr = lr

  def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    return params + self.lr * grad


def _upper(J: np.ndarray) -> np.ndarray:
  return J[np.triu_indices_from(J, k=1)]


def _from_upper(values: np.ndarray, d: int) -> np.ndarray:
  J = np.zeros((d, d))
  J[np.triu_indices(d, k=1)] = values
  return J + J.T


def _sampler_for(sampler: SamplerConfig, model: IsingModel,
                 data_sigma: np.ndarray | None) -> SamplerConfig:
  if sampler.kind != SamplerKind.PAVG:
    return sampler
  if sampler.preconditioner_source == 'data':
    Sigma = data_sigma
  else:
    Sigma = model.J
  return SamplerConfig(
      kind=SamplerKind.PAVG,
      eps=sampler.eps,
      preconditioner=PreconditionerState.create(Sigma, sampler.eps),
      preconditioner_source=sampler.preconditioner_source or 'model',
      name=sampler.name)


def pcd_train(dataset: np.ndarray,
              config: PcdConfig,
              model_true: IsingModel,
              seed: int = 0) -> tuple[IsingEstimate, pd.DataFrame]:
  """Fit J by PCD with a persistent buffer, b fixed to the true bias.

  Returns:
    The estimate and a trace with one row per checkpoint (iteration,
    frobenius_error, acceptance_rate).
  """
  config.validate()
  dataset = np.asarray(dataset, dtype=float)
  if not np.all(np.abs(dataset) == 1):
    raise ValueError('Dataset must hold +-1 vectors')
  d = model_true.dim
  rng = make_stream(seed, 2**62)
  b = model_true.b
  J = np.zeros((d, d))
  params = _upper(J)
  optimizer = Adam(config.lr) if config.optimizer == 'adam' else Sgd(config.lr)
  buffer = random_states(model_true.space, d, config.n_buffer, rng)
  n_steps = budget_steps(config.sampler, config.K, model_true.space.k,
                         config.budget_multiplier)
  sampler = config.sampler
  if sampler.kind == SamplerKind.GIBBS and sampler.scan != 'random':
    sampler = SamplerConfig(SamplerKind.GIBBS, scan='random', name=sampler.name)
  data_sigma = None
  if (sampler.kind == SamplerKind.PAVG and
      sampler.preconditioner_source == 'data'):
    candidates = ebm_sigma_from_data(dataset)
    if candidates['precision'] is None:
      raise ValueError('Data precision is unavailable for the preconditioner')
    # Gaussian moment matching: the Hessian of f is minus the precision
    data_sigma = -candidates['precision']
  logger.info('PCD with %s: %s steps per update, %s iterations', sampler.name,
              n_steps, config.n_iters)

  rows = []
  started = time.monotonic()
  accept_sum, accept_count = 0.0, 0

  def checkpoint(iteration):
    error = float(np.linalg.norm(J - model_true.J, ord='fro'))
    rate = accept_sum / accept_count if accept_count else float('nan')
    rows.append({
        'iteration': iteration,
        'frobenius_error': error,
        'acceptance_rate': rate,
    })
    logger.info('Iteration %s: ||J - J*||_F = %.4f, acceptance %.3f (%s)',
                iteration, error, rate, format_elapsed(started))

  checkpoint(0)
  for it in range(1, config.n_iters + 1):
    model = IsingModel(b, J)
    data_idx = rng.choice(dataset.shape[0], config.n_batch, replace=False)
    buf_idx = rng.choice(config.n_buffer, config.n_batch, replace=False)
    chains = ChainEnsemble.create(
        model,
        buffer[buf_idx],
        seed=int(rng.integers(2**63)),
        block_size=config.chain_block)
    step_sampler = _sampler_for(sampler, model, data_sigma)
    trace = samplers.run_chain(
        model,
        step_sampler,
        n_steps,
        chains,
        record_states=False,
        threads=config.threads)
    buffer[buf_idx] = chains.states
    accept_sum += float(trace.accepted.sum())
    accept_count += trace.accepted.size
    grad = pcd_gradient(model, dataset[data_idx], chains.states,
                        config.l1_strength)
    params = optimizer.step(params, _upper(grad))
    J = _from_upper(params, d)
    if it % config.checkpoint_every == 0 or it == config.n_iters:
      checkpoint(it)
  return IsingEstimate(J, b, model_true.J), pd.DataFrame(rows)


def generate_ground_truth(model: IsingModel,
                          n_samples: int,
                          n_steps: int,
                          seed: int = 0,
                          n_chains: int | None = None,
                          threads: int = 1,
                          chain_block: int | None = None) -> np.ndarray:
  """Samples from systematic-scan Gibbs chains after `n_steps` sweeps.

  With `n_chains` < `n_samples` each chain keeps a state every
  n_steps // (n_samples / n_chains) sweeps after a burn-in of the same
  length, so the total sweep count per chain stays `n_steps`.
  """
  n_chains = n_chains or n_samples
  if n_samples % n_chains:
    raise ValueError('n_samples must be a multiple of n_chains')
  per_chain = n_samples // n_chains
  thin = max(1, n_steps // (per_chain + 1))
  ensemble = ChainEnsemble.random(model, n_chains, seed, chain_block)
  gibbs = SamplerConfig(SamplerKind.GIBBS, scan='systematic')
  trace = samplers.run_chain(
      model, gibbs, thin * (per_chain + 1), ensemble, thin=thin,
      threads=threads)
  samples = trace.history(start_step=2 * thin)
  logger.info('Generated %s samples from %s chains (%s sweeps each)',
              n_samples, n_chains, trace.n_steps)
  return samples.reshape(-1, model.dim)[:n_samples]
