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

Records written by experiments.
"""

from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone


@dataclass
class RunMetadata:
  """Content of the `.meta.json` sibling of every CSV."""
  experiment: str
  seed: int
  version: str
  config: dict = field(default_factory=dict)
  created: str = ''
  extra: dict = field(default_factory=dict)

  def __post_init__(self):
    if not self.created:
      self.created = datetime.now(timezone.utc).isoformat(timespec='seconds')

  def to_dict(self) -> dict:
    return asdict(self)


@dataclass
class CheckpointRecord:
  """Metrics of one sampler at one evaluation checkpoint.

  Per-chain metrics are summarized as mean and standard error over chains.
  """
  sampler: str
  step: int
  elapsed: float
  acceptance_rate: float
  mean_l1_jump: float
  marginal_error: float
  marginal_error_stderr: float
  ess_mean: float
  ess_median: float
  sampler_steps: int | None = None
  """Steps taken by the sampler itself; `step` counts unit-cost steps."""
  covariance_error: float | None = None
  covariance_error_stderr: float | None = None
  pairwise_error: float | None = None
  pairwise_error_stderr: float | None = None
  gamma: float | None = None

  def to_dict(self) -> dict:
    return asdict(self)
