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
 """
import time
import numpy as np
from scipy.special import logsumexp


def format_elapsed(started: float, now: float | None = None) -> str:
  """Time since the `time.monotonic()` reading `started`, e.g. '1h02m03.4s'."""
  seconds = max(0.0, (time.monotonic() if now is None else now) - started)
  minutes, seconds = divmod(seconds, 60)
  hours, minutes = divmod(int(minutes), 60)
  if hours:
    return f'{hours}h{minutes:02d}m{seconds:04.1f}s'
  if minutes:
    return f'{minutes}m{seconds:04.1f}s'
  return f'{seconds:.2f}s'


def make_stream(seed: int, stream_id: int) -> np.random.Generator:
  """Counter-based RNG stream keyed by (seed, stream_id).

  Philox streams with distinct keys are independent, so chain block `i`
  always sees the same random numbers no matter which worker runs it.
  """
  key = np.array([seed, stream_id], dtype=np.uint64)
  return np.random.Generator(np.random.Philox(key=key))


def log_normalize(logits: np.ndarray, axis: int = -1) -> np.ndarray:
  """Subtract the log-partition along `axis`."""
  return logits - logsumexp(logits, axis=axis, keepdims=True)


def sample_categorical(logits: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
  """Inverse-CDF draw over the last axis of unnormalized logits.

  Returns integer indices with shape `logits.shape[:-1]`. Logits may hold
  -inf for excluded cells.
  """
  shifted = logits - np.max(logits, axis=-1, keepdims=True)
  weights = np.exp(shifted)
  cdf = np.cumsum(weights, axis=-1)
  u = rng.random(logits.shape[:-1] + (1,)) * cdf[..., -1:]
  idx = np.sum(cdf <= u, axis=-1)
  # guards against u rounding up to the total
  return np.minimum(idx, logits.shape[-1] - 1)
