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

Metropolis-Hastings transition kernels.

Every kernel takes a cache with `states`, `logf` and `grad` arrays of a
batch of chains (a ChainBlock), performs one step for all of them in
place and returns a StepOutcome. Rejected chains keep state and caches
untouched.
"""

import enum
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable
import numpy as np
import pandas as pd

from logger import logger, diagnostics_logger
import proposals
from state_spaces import ChainEnsemble, lattice_index
from utils import sample_categorical

logger = logger.getChild('samplers')


class SamplerKind(str, enum.Enum):
  GIBBS = 'gibbs'
  GWG = 'gwg'
  ORDINAL_GWG = 'ordinal_gwg'
  MH_UNIFORM = 'mh_uniform'
  NCG = 'ncg'
  AVG = 'avg'
  PAVG = 'pavg'


STEP_SIZE_KINDS = (SamplerKind.NCG, SamplerKind.AVG, SamplerKind.PAVG)
RADIUS_KINDS = (SamplerKind.ORDINAL_GWG, SamplerKind.MH_UNIFORM)


@dataclass
class SamplerConfig:
  """Kernel selection and its parameters."""
  kind: SamplerKind
  eps: float | None = None
  """Step size (NCG/AVG/PAVG)."""
  radius: int | None = None
  """Grid radius (ordinal GWG, MH-uniform)."""
  scan: str = 'systematic'
  """Gibbs scan order: 'systematic' sweep or 'random' single site."""
  preconditioner: Any = None
  """PreconditionerState for PAVG; swapped between steps by adaptation."""
  preconditioner_source: str = ''
  """How experiments build the PAVG preconditioner: adaptive, model, data."""
  name: str = ''

  def __post_init__(self):
    self.kind = SamplerKind(self.kind)
    if not self.name:
      self.name = self.kind.value
    self.validate()

  def validate(self):
    if self.kind in STEP_SIZE_KINDS:
      if self.eps is None or not self.eps > 0:
        raise ValueError(
            f'Sampler {self.kind.value} needs a positive eps, got {self.eps}')
    if self.kind in RADIUS_KINDS:
      if self.radius is None or int(self.radius) < 1:
        raise ValueError(f'Sampler {self.kind.value} needs radius >= 1, '
                         f'got {self.radius}')
      self.radius = int(self.radius)
    if self.scan not in ('systematic', 'random'):
      raise ValueError(f'Unknown scan order {self.scan}')

  @classmethod
  def from_dict(cls, values: dict) -> 'SamplerConfig':
    known = ('kind', 'eps', 'radius', 'scan', 'preconditioner_source', 'name')
    if 'kind' not in values:
      raise ValueError('Sampler config is missing kind')
    return cls(**{k: values[k] for k in known if values.get(k) is not None})

  def to_dict(self) -> dict:
    return {
        'name': self.name,
        'kind': self.kind.value,
        'eps': self.eps,
        'radius': self.radius,
        'scan': self.scan,
        'preconditioner_source': self.preconditioner_source,
    }


@dataclass
class StepOutcome:
  """Result of one step of a batch of chains.

  `states` is the cache array itself (not a copy).
  """
  states: np.ndarray
  accepted: np.ndarray
  log_accept_ratio: np.ndarray
  l1_jump: np.ndarray


def mh_accept(log_f_new, log_f_old, log_q_rev, log_q_fwd, log_aux_ratio,
              rng: np.random.Generator):
  """Vectorized Metropolis-Hastings test in log space.

  Returns:
    (accepted flags, log acceptance ratios)
  """
  with np.errstate(invalid='ignore'):
    log_ratio = (np.asarray(log_f_new, dtype=float) - log_f_old + log_q_rev -
                 log_q_fwd + log_aux_ratio)
  log_ratio = np.where(np.isnan(log_ratio), -np.inf, log_ratio)
  log_ratio = np.where(np.isneginf(log_f_new), -np.inf, log_ratio)
  u = rng.random(np.shape(log_ratio))
  with np.errstate(divide='ignore'):
    accepted = np.log(u) < log_ratio
  return accepted, log_ratio


def gaussian_log_ratio(z: np.ndarray, mean_new: np.ndarray,
                       mean_old: np.ndarray) -> np.ndarray:
  """log N(z; mean_new, I) - log N(z; mean_old, I)."""
  return -0.5 * (np.sum((z - mean_new)**2, axis=-1) -
                 np.sum((z - mean_old)**2, axis=-1))


def _commit(cache, proposal, f_new, g_new, accepted, log_ratio):
  old = cache.states
  l1 = np.where(accepted, np.abs(proposal - old).sum(axis=1), 0.0)
  cache.states[accepted] = proposal[accepted]
  cache.logf[accepted] = f_new[accepted]
  cache.grad[accepted] = g_new[accepted]
  return StepOutcome(cache.states, accepted, log_ratio, l1)


def ncg_step(target, cache, eps: float,
             rng: np.random.Generator) -> StepOutcome:
  space = target.space
  s = cache.states
  fwd = proposals.build_ncg(s, cache.grad, eps, space)
  prop = proposals.sample(fwd, rng)
  f_new, g_new = target.log_f_and_grad(prop)
  rev = proposals.build_ncg(prop, g_new, eps, space)
  accepted, log_ratio = mh_accept(f_new, cache.logf,
                                  proposals.log_pmf(rev, s),
                                  proposals.log_pmf(fwd, prop), 0.0, rng)
  return _commit(cache, prop, f_new, g_new, accepted, log_ratio)


def _auxiliary_step(target, cache, build, mean, rng):
  # draw order: auxiliary normals, proposal uniforms, accept uniforms
  s = cache.states
  mu = mean(s)
  z = mu + rng.standard_normal(s.shape)
  fwd = build(s, cache.grad, z)
  prop = proposals.sample(fwd, rng)
  f_new, g_new = target.log_f_and_grad(prop)
  rev = build(prop, g_new, z)
  log_aux = gaussian_log_ratio(z, mean(prop), mu)
  accepted, log_ratio = mh_accept(f_new, cache.logf,
                                  proposals.log_pmf(rev, s),
                                  proposals.log_pmf(fwd, prop), log_aux, rng)
  return _commit(cache, prop, f_new, g_new, accepted, log_ratio)


def avg_step(target, cache, eps: float,
             rng: np.random.Generator) -> StepOutcome:
  scale = np.sqrt(2.0 / eps)
  return _auxiliary_step(
      target, cache,
      lambda s, g, z: proposals.build_avg(s, g, z, eps, target.space),
      lambda s: scale * s, rng)


def pavg_step(target, cache, pre, rng: np.random.Generator) -> StepOutcome:
  """AVG with the global preconditioner `pre` (a PreconditionerState)."""
  pre.ensure_fresh()
  return _auxiliary_step(
      target, cache,
      lambda s, g, z: proposals.build_pavg(s, g, z, pre, target.space),
      pre.transform, rng)


def _local_step(target, cache, radius, rng):
  space = target.space
  s = cache.states
  fwd = proposals.build_local(s, cache.grad, space, radius)
  prop, factor, value, old = fwd.sample(rng)
  f_new, g_new = target.log_f_and_grad(prop)
  rev = proposals.build_local(prop, g_new, space, radius)
  accepted, log_ratio = mh_accept(f_new, cache.logf, rev.log_prob(factor, old),
                                  fwd.log_prob(factor, value), 0.0, rng)
  return _commit(cache, prop, f_new, g_new, accepted, log_ratio)


def gwg_step(target, cache, rng: np.random.Generator) -> StepOutcome:
  return _local_step(target, cache, None, rng)


def ordinal_gwg_step(target, cache, r: int,
                     rng: np.random.Generator) -> StepOutcome:
  if target.space.is_categorical:
    raise ValueError('Ordinal GWG needs an ordered support')
  return _local_step(target, cache, r, rng)


def mh_uniform_step(target, cache, r: int,
                    rng: np.random.Generator) -> StepOutcome:
  space = target.space
  fwd = proposals.build_uniform_ball(cache.states, r, space)
  prop = fwd.sample(rng)
  rev = proposals.build_uniform_ball(prop, r, space)
  f_new, g_new = target.log_f_and_grad(prop)
  accepted, log_ratio = mh_accept(f_new, cache.logf, -rev.log_size,
                                  -fwd.log_size, 0.0, rng)
  return _commit(cache, prop, f_new, g_new, accepted, log_ratio)


def _gibbs_update(target, cache, sites: np.ndarray, rng):
  """Resample factor `sites[c]` of every chain c from its exact conditional."""
  space = target.space
  n = cache.states.shape[0]
  k = space.k
  indices = space.to_indices(cache.states)
  candidates = np.repeat(indices[:, None, :], k, axis=1)
  candidates[np.arange(n), :, sites] = np.arange(k)
  cand_states = space.from_indices(candidates).reshape(n * k, -1)
  f_all, g_all = target.log_f_and_grad(cand_states)
  f_all = f_all.reshape(n, k)
  choice = sample_categorical(f_all, rng)
  rows = np.arange(n) * k + choice
  old = cache.states.copy()
  cache.states[:] = cand_states[rows]
  cache.logf[:] = f_all[np.arange(n), choice]
  cache.grad[:] = g_all[rows]
  return np.abs(cache.states - old).sum(axis=1)


def gibbs_step(target, cache, scan: str,
               rng: np.random.Generator) -> StepOutcome:
  """A systematic sweep over all factors, or one random-scan site update."""
  n = cache.states.shape[0]
  m = target.n_factors
  if scan == 'systematic':
    l1 = np.zeros(n)
    for site in range(m):
      l1 += _gibbs_update(target, cache, np.full(n, site), rng)
  elif scan == 'random':
    l1 = _gibbs_update(target, cache, rng.integers(0, m, size=n), rng)
  else:
    raise ValueError(f'Unknown scan order {scan}')
  return StepOutcome(cache.states, np.ones(n, dtype=bool), np.zeros(n), l1)


def step_block(target, config: SamplerConfig, block) -> StepOutcome:
  """Advance one chain block by one step of the configured kernel."""
  kind = config.kind
  rng = block.rng
  if kind == SamplerKind.NCG:
    return ncg_step(target, block, config.eps, rng)
  if kind == SamplerKind.AVG:
    return avg_step(target, block, config.eps, rng)
  if kind == SamplerKind.PAVG:
    if config.preconditioner is None:
      raise ValueError('PAVG needs a preconditioner')
    return pavg_step(target, block, config.preconditioner, rng)
  if kind == SamplerKind.GWG:
    return gwg_step(target, block, rng)
  if kind == SamplerKind.ORDINAL_GWG:
    return ordinal_gwg_step(target, block, config.radius, rng)
  if kind == SamplerKind.MH_UNIFORM:
    return mh_uniform_step(target, block, config.radius, rng)
  if kind == SamplerKind.GIBBS:
    return gibbs_step(target, block, config.scan, rng)
  raise ValueError(f'Unknown sampler kind {kind}')


@dataclass
class ChainTrace:
  """Per-step statistics of every chain plus thinned state snapshots."""
  accepted: np.ndarray
  log_accept_ratio: np.ndarray
  l1_jump: np.ndarray
  recorded_steps: list[int] = field(default_factory=list)
  states: list[np.ndarray] = field(default_factory=list, repr=False)
  elapsed: float = 0.0

  @property
  def n_steps(self) -> int:
    return self.accepted.shape[0]

  @property
  def acceptance_rate(self) -> float:
    if not self.accepted.size:
      return float('nan')
    return float(self.accepted.mean())

  @property
  def mean_l1_jump(self) -> float:
    if not self.l1_jump.size:
      return float('nan')
    return float(self.l1_jump.mean())

  def history(self, start_step: int = 0) -> np.ndarray:
    """Recorded states after `start_step`, shape (n_records, n_chains, dim)."""
    picked = [
        s for step, s in zip(self.recorded_steps, self.states)
        if step >= start_step
    ]
    if not picked:
      return np.empty((0, 0, 0))
    return np.stack(picked)

  def to_frame(self) -> pd.DataFrame:
    """Long format: step, chain, accepted, log_accept_ratio, l1_jump."""
    n_steps, n_chains = self.accepted.shape
    return pd.DataFrame({
        'step': np.repeat(np.arange(1, n_steps + 1), n_chains),
        'chain': np.tile(np.arange(n_chains), n_steps),
        'accepted': self.accepted.ravel(),
        'log_accept_ratio': self.log_accept_ratio.ravel(),
        'l1_jump': self.l1_jump.ravel(),
    })

  def states_frame(self) -> pd.DataFrame:
    """Recorded snapshots: step, chain, dim_0..dim_{d-1}."""
    if not self.states:
      return pd.DataFrame(columns=['step', 'chain'])
    stacked = np.stack(self.states)
    n_rec, n_chains, dim = stacked.shape
    df = pd.DataFrame(
        stacked.reshape(-1, dim), columns=[f'dim_{i}' for i in range(dim)])
    df.insert(0, 'chain', np.tile(np.arange(n_chains), n_rec))
    df.insert(0, 'step', np.repeat(self.recorded_steps, n_chains))
    return df


StepCallback = Callable[[int, ChainEnsemble, StepOutcome], bool | None]


def run_chain(target,
              config: SamplerConfig,
              n_steps: int,
              ensemble: ChainEnsemble,
              callbacks: Iterable[StepCallback] = (),
              thin: int = 1,
              record_states: bool = True,
              threads: int = 1,
              deadline: float | None = None) -> ChainTrace:
  """Apply the configured kernel `n_steps` times to every chain.

  Args:
    target: target distribution.
    config: sampler configuration.
    n_steps: number of steps (upper bound when `deadline` is set).
    ensemble: chains to advance in place.
    callbacks: called after every step with (step, ensemble, outcome),
      a truthy return value stops the run.
    thin: keep a state snapshot every `thin` steps.
    record_states: False to skip snapshots entirely.
    threads: worker threads over chain blocks.
    deadline: `time.monotonic()` value after which the run stops.

  Returns:
    ChainTrace with one row per executed step.
  """
  if thin < 1:
    raise ValueError(f'thin must be >= 1, got {thin}')
  n = ensemble.n_chains
  accepted = np.zeros((n_steps, n), dtype=bool)
  log_ratio = np.zeros((n_steps, n))
  l1 = np.zeros((n_steps, n))
  trace = ChainTrace(accepted, log_ratio, l1)
  callbacks = list(callbacks)
  blocks = ensemble.blocks
  starts = np.cumsum([0] + [b.n_chains for b in blocks])
  debug = diagnostics_logger.isEnabledFor(logging.DEBUG)
  started = time.monotonic()
  executor = ThreadPoolExecutor(threads) if threads > 1 and len(
      blocks) > 1 else None
  done = n_steps
  try:
    for t in range(n_steps):
      if executor:
        outcomes = list(
            executor.map(lambda b: step_block(target, config, b), blocks))
      else:
        outcomes = [step_block(target, config, b) for b in blocks]
      for b, out in enumerate(outcomes):
        sl = slice(starts[b], starts[b + 1])
        accepted[t, sl] = out.accepted
        log_ratio[t, sl] = out.log_accept_ratio
        l1[t, sl] = out.l1_jump
      ensemble.step_counter += 1
      if record_states and (t + 1) % thin == 0:
        trace.recorded_steps.append(t + 1)
        trace.states.append(ensemble.states.copy())
      if debug:
        diagnostics_logger.debug('%s step %s: acceptance %.3f, mean jump %.4f',
                                 config.name, t + 1, accepted[t].mean(),
                                 l1[t].mean())
      outcome = StepOutcome(ensemble.states, accepted[t], log_ratio[t], l1[t])
      stop = False
      for cb in callbacks:
        stop = bool(cb(t + 1, ensemble, outcome)) or stop
      if stop or (deadline is not None and time.monotonic() >= deadline):
        done = t + 1
        break
  finally:
    if executor:
      executor.shutdown()
  if done < n_steps:
    trace.accepted = accepted[:done]
    trace.log_accept_ratio = log_ratio[:done]
    trace.l1_jump = l1[:done]
  trace.elapsed = time.monotonic() - started
  logger.debug('%s: %s steps x %s chains in %.2fs, acceptance %.3f',
               config.name, done, n, trace.elapsed, trace.acceptance_rate)
  return trace


def transition_row(target,
                   config: SamplerConfig,
                   index: int,
                   all_states: np.ndarray,
                   f_all: np.ndarray,
                   grad_all: np.ndarray,
                   acceptance: Callable[[np.ndarray], np.ndarray] | None = None
                  ) -> np.ndarray:
  """Exact transition probabilities out of `all_states[index]`.

  `all_states` must be the full lattice in `enumerate_states` order with f
  and grad f evaluated on it. `acceptance` maps exact acceptance
  probabilities to the ones used instead (a corrupted kernel).
  Auxiliary-variable kernels have no finite-state transition matrix.
  """
  space = target.space
  kind = config.kind
  s = all_states[index]
  n_states = all_states.shape[0]
  row = np.zeros(n_states)

  def accept_prob(log_ratio):
    with np.errstate(over='ignore'):
      p = np.exp(np.minimum(0.0, log_ratio))
    return acceptance(p) if acceptance else p

  if kind == SamplerKind.GIBBS:
    if config.scan != 'random':
      raise ValueError('Only random-scan Gibbs has a single-site matrix')
    m = target.n_factors
    cur = space.to_indices(s)
    for site in range(m):
      cand = np.repeat(cur[None, :], space.k, axis=0)
      cand[:, site] = np.arange(space.k)
      rows = lattice_index(space, space.from_indices(cand))
      logits = f_all[rows]
      probs = np.exp(logits - np.logaddexp.reduce(logits))
      row[rows] += probs / m
    return row

  if kind == SamplerKind.NCG:
    fwd = proposals.build_ncg(s, grad_all[index], config.eps, space)
    log_q_fwd = proposals.log_pmf(fwd, all_states)
    rev = proposals.build_ncg(all_states, grad_all, config.eps, space)
    log_q_rev = proposals.log_pmf(rev, np.broadcast_to(s, all_states.shape))
    log_ratio = f_all - f_all[index] + log_q_rev - log_q_fwd
    row = np.exp(log_q_fwd) * accept_prob(log_ratio)
  elif kind in (SamplerKind.GWG, SamplerKind.ORDINAL_GWG):
    radius = config.radius if kind == SamplerKind.ORDINAL_GWG else None
    fwd = proposals.build_local(s, grad_all[index], space, radius)
    cur = fwd.current
    for factor, value in zip(*np.nonzero(np.isfinite(fwd.log_probs))):
      cand = cur.copy()
      cand[factor] = value
      j = int(lattice_index(space, space.from_indices(cand)))
      rev = proposals.build_local(all_states[j], grad_all[j], space, radius)
      log_ratio = (f_all[j] - f_all[index] +
                   rev.log_probs[factor, cur[factor]] -
                   fwd.log_probs[factor, value])
      row[j] += np.exp(fwd.log_probs[factor, value]) * accept_prob(log_ratio)
  elif kind == SamplerKind.MH_UNIFORM:
    fwd = proposals.build_uniform_ball(s, config.radius, space)
    inside = fwd.contains(all_states)
    rev_size = proposals.build_uniform_ball(all_states, config.radius,
                                            space).log_size
    log_ratio = f_all - f_all[index] - rev_size + fwd.log_size
    row = np.where(inside,
                   np.exp(-fwd.log_size) * accept_prob(log_ratio), 0.0)
  else:
    raise ValueError(f'No exact transition matrix for {kind.value}')
  row[index] += max(0.0, 1.0 - row.sum())
  return row
