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

Discrete supports, state vectors and chain ensembles.
"""

import enum
import itertools
from dataclasses import dataclass, field
import numpy as np
import pandas as pd

from logger import logger
from utils import make_stream

logger = logger.getChild('state_spaces')

StateVector = np.ndarray
"""A point of S^d embedded in R^d (R^{d*k} for categorical spaces)."""


class EnumerationLimitError(ValueError):
  """Exhaustive enumeration would exceed the configured cap."""

  def __init__(self, size_estimate: int, cap: int) -> None:
    super().__init__(
        f'Enumeration of {size_estimate} states exceeds the cap of {cap}')
    self.size_estimate = size_estimate
    self.cap = cap


class SpaceKind(str, enum.Enum):
  BINARY01 = 'binary01'
  BINARY_PM1 = 'binary_pm1'
  ORDINAL = 'ordinal'
  CATEGORICAL = 'categorical'


@dataclass(frozen=True)
class StateSpace:
  """Per-dimension discrete support.

  For binary and ordinal spaces every coordinate takes one of `values`.
  Categorical spaces are stored flat: `d` groups of `group_size` coordinates,
  each group a one-hot vector.
  """
  kind: SpaceKind
  values: tuple[float, ...]
  group_size: int = 0

  def __post_init__(self):
    vals = np.asarray(self.values, dtype=float)
    if self.kind == SpaceKind.CATEGORICAL:
      if self.group_size < 2:
        raise ValueError('Categorical spaces need group_size >= 2')
      return
    if len(vals) < 2:
      raise ValueError('A support needs at least two values')
    if not np.all(np.isfinite(vals)):
      raise ValueError('Support values must be finite')
    if np.any(np.diff(vals) <= 0):
      raise ValueError('Support values must be strictly increasing')

  @property
  def is_categorical(self) -> bool:
    return self.kind == SpaceKind.CATEGORICAL

  @property
  def is_binary(self) -> bool:
    return self.kind in (SpaceKind.BINARY01, SpaceKind.BINARY_PM1) or (
        self.kind == SpaceKind.ORDINAL and len(self.values) == 2)

  @property
  def k(self) -> int:
    """Number of support points per dimension (per group if categorical)."""
    return self.group_size if self.is_categorical else len(self.values)

  @property
  def grid(self) -> np.ndarray:
    """Support values as an array (one-hot coordinates are 0/1)."""
    return np.asarray(self.values, dtype=float)

  def embedded_dim(self, d: int) -> int:
    return d * self.group_size if self.is_categorical else d

  def n_factors(self, dim: int) -> int:
    """Number of independent factors in a vector of embedded size `dim`."""
    if self.is_categorical:
      return dim // self.group_size
    return dim

  def to_indices(self, states: np.ndarray) -> np.ndarray:
    """Support indices per factor, shape (..., n_factors)."""
    states = np.asarray(states, dtype=float)
    if self.is_categorical:
      grouped = states.reshape(states.shape[:-1] + (-1, self.group_size))
      return np.argmax(grouped, axis=-1)
    return np.abs(states[..., None] - self.grid).argmin(axis=-1)

  def from_indices(self, indices: np.ndarray) -> np.ndarray:
    """Inverse of `to_indices`."""
    indices = np.asarray(indices, dtype=int)
    if self.is_categorical:
      onehot = np.eye(self.group_size)[indices]
      return onehot.reshape(indices.shape[:-1] + (-1,))
    return self.grid[indices]

  def contains(self, states: np.ndarray) -> np.ndarray:
    """True for every row that lies in the support."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if self.is_categorical:
      if states.shape[-1] % self.group_size:
        return np.zeros(states.shape[0], dtype=bool)
      grouped = states.reshape(states.shape[0], -1, self.group_size)
      binary = np.all((grouped == 0) | (grouped == 1), axis=(1, 2))
      one_hot = np.all(grouped.sum(axis=-1) == 1, axis=-1)
      return binary & one_hot
    return np.all(np.isin(states, self.grid), axis=-1)

  def __str__(self) -> str:
    if self.is_categorical:
      return f'StateSpace({self.kind.value}, k={self.group_size})'
    return f'StateSpace({self.kind.value}, k={self.k})'


def binary01() -> StateSpace:
  return StateSpace(SpaceKind.BINARY01, (0.0, 1.0))


def binary_pm1() -> StateSpace:
  return StateSpace(SpaceKind.BINARY_PM1, (-1.0, 1.0))


def categorical(k: int) -> StateSpace:
  return StateSpace(SpaceKind.CATEGORICAL, (0.0, 1.0), group_size=k)


def make_ordinal_grid(n_points: int, lo: float, hi: float) -> StateSpace:
  """Equally spaced ordinal support lo + i*(hi-lo)/(n_points-1)."""
  if n_points < 2:
    raise ValueError(f'n_points must be >= 2, got {n_points}')
  if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
    raise ValueError(f'Invalid grid bounds [{lo}, {hi}]')
  step = (hi - lo) / (n_points - 1)
  values = lo + step * np.arange(n_points)
  # pin the end point so the last value is exactly `hi`
  values[-1] = hi
  return StateSpace(SpaceKind.ORDINAL, tuple(float(v) for v in values))


def space_from_name(name: str, **kw) -> StateSpace:
  """Build a space from its config name."""
  if name == SpaceKind.BINARY01.value:
    return binary01()
  if name == SpaceKind.BINARY_PM1.value:
    return binary_pm1()
  if name == SpaceKind.CATEGORICAL.value:
    return categorical(int(kw.get('group_size', 2)))
  if name == SpaceKind.ORDINAL.value:
    return make_ordinal_grid(
        int(kw.get('n_points', 50)), float(kw.get('lo', -1.5)),
        float(kw.get('hi', 3.0)))
  raise ValueError(f'Unknown state space {name}')


def enumerate_states(space: StateSpace, d: int, cap: int) -> np.ndarray:
  """All |S|^d states in lexicographic order of support indices.

  Args:
    space: the per-dimension support.
    d: number of dimensions (groups for categorical spaces).
    cap: maximal number of states to materialize.

  Returns:
    Array of shape (|S|^d, embedded_dim).
  """
  size = space.k**d
  if size > cap:
    raise EnumerationLimitError(size, cap)
  indices = np.array(
      list(itertools.product(range(space.k), repeat=d)), dtype=int).reshape(
          size, d)
  return space.from_indices(indices)


def lattice_index(space: StateSpace, states: np.ndarray) -> np.ndarray:
  """Row of each state in the `enumerate_states` ordering."""
  indices = space.to_indices(states)
  m = indices.shape[-1]
  weights = space.k**np.arange(m - 1, -1, -1)
  return indices @ weights


def random_states(space: StateSpace, d: int, n: int,
                  rng: np.random.Generator) -> np.ndarray:
  """`n` independent states, each factor uniform over the support."""
  indices = rng.integers(0, space.k, size=(n, d))
  return space.from_indices(indices)


def random_state(space: StateSpace, d: int,
                 rng: np.random.Generator) -> StateVector:
  return random_states(space, d, 1, rng)[0]


def states_frame(states: np.ndarray) -> pd.DataFrame:
  """One row per chain, columns dim_0..dim_{d-1}."""
  states = np.atleast_2d(states)
  return pd.DataFrame(
      states, columns=[f'dim_{i}' for i in range(states.shape[1])])


@dataclass
class ChainBlock:
  """A slice of an ensemble sharing one RNG stream.

  The arrays are views into the parent ensemble, so kernels that update a
  block in place update the ensemble.
  """
  states: np.ndarray
  logf: np.ndarray
  grad: np.ndarray
  rng: np.random.Generator
  block_id: int

  @property
  def n_chains(self) -> int:
    return self.states.shape[0]


@dataclass
class ChainEnsemble:
  """A batch of parallel chains with cached f and grad f."""
  space: StateSpace
  states: np.ndarray
  logf: np.ndarray
  grad: np.ndarray
  seed: int
  block_size: int
  step_counter: int = 0
  blocks: list[ChainBlock] = field(default_factory=list, repr=False)

  @classmethod
  def create(cls,
             target,
             states: np.ndarray,
             seed: int,
             block_size: int | None = None) -> 'ChainEnsemble':
    """Wrap `states` and evaluate the caches under `target`."""
    states = np.array(np.atleast_2d(states), dtype=float)
    if states.shape[1] != target.dim:
      raise ValueError(f'States have dimension {states.shape[1]}, '
                       f'target expects {target.dim}')
    n = states.shape[0]
    block_size = int(block_size or n)
    if block_size < 1:
      raise ValueError('block_size must be positive')
    logf, grad = target.log_f_and_grad(states)
    ensemble = cls(
        space=target.space,
        states=states,
        logf=np.array(logf, dtype=float),
        grad=np.array(grad, dtype=float),
        seed=seed,
        block_size=block_size)
    ensemble._make_blocks()
    logger.debug('Created ensemble of %s chains in %s blocks (dim=%s)', n,
                 len(ensemble.blocks), target.dim)
    return ensemble

  @classmethod
  def random(cls,
             target,
             n_chains: int,
             seed: int,
             block_size: int | None = None) -> 'ChainEnsemble':
    """Ensemble initialized uniformly over the lattice."""
    # stream 2**63 is reserved for initialization, blocks count up from 0
    init_rng = make_stream(seed, 2**63)
    states = random_states(target.space, target.n_factors, n_chains, init_rng)
    return cls.create(target, states, seed, block_size)

  def _make_blocks(self):
    self.blocks = []
    for block_id, start in enumerate(
        range(0, self.n_chains, self.block_size)):
      sl = slice(start, start + self.block_size)
      self.blocks.append(
          ChainBlock(
              states=self.states[sl],
              logf=self.logf[sl],
              grad=self.grad[sl],
              rng=make_stream(self.seed, block_id),
              block_id=block_id))

  @property
  def n_chains(self) -> int:
    return self.states.shape[0]

  @property
  def dim(self) -> int:
    return self.states.shape[1]

  @property
  def stream_ids(self) -> np.ndarray:
    """RNG stream (block) id of every chain."""
    return np.arange(self.n_chains) // self.block_size

  def refresh(self, target):
    """Recompute the caches, e.g. after the target's parameters changed."""
    logf, grad = target.log_f_and_grad(self.states)
    self.logf[:] = logf
    self.grad[:] = grad

  def to_frame(self) -> pd.DataFrame:
    return states_frame(self.states)
