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

CSV, JSON and matrix outputs.
"""

import dataclasses
import enum
import json
import math
import os
import numpy as np
import pandas as pd
import smart_open

from logger import logger
import models

logger = logger.getChild('storage')


class JsonEncoder(json.JSONEncoder):
  """A custom JSON encoder for numpy values and result records."""

  def default(self, o):
    # Handle numpy types first
    if isinstance(o, np.floating):
      if np.isfinite(o):
        return float(o)
      if np.isinf(o):
        return 'Infinity' if o > 0 else '-Infinity'
      if np.isnan(o):
        return 'NaN'

    if isinstance(o, np.integer):
      return int(o)
    if isinstance(o, np.bool_):
      return bool(o)

    # Handle numpy arrays
    if isinstance(o, np.ndarray):
      return [self._scalar(v) for v in o.tolist()] if o.ndim == 1 else [
          self.default(row) for row in o
      ]

    if isinstance(o, enum.Enum):
      return o.value
    if isinstance(o, (models.RunMetadata, models.CheckpointRecord)):
      return o.to_dict()
    if dataclasses.is_dataclass(o) and not isinstance(o, type):
      return {
          k: self.default(v) if isinstance(v, (np.generic, np.ndarray)) else v
          for k, v in o.__dict__.items()
          if not k.startswith('_')
      }
    return super().default(o)

  @staticmethod
  def _scalar(v):
    if isinstance(v, float) and not math.isfinite(v):
      if math.isnan(v):
        return 'NaN'
      return 'Infinity' if v > 0 else '-Infinity'
    return v


def to_json(obj) -> str:
  return json.dumps(obj, cls=JsonEncoder, indent=2)


def _ensure_parent(path: str):
  if '://' in path:
    return
  parent = os.path.dirname(path)
  if parent:
    os.makedirs(parent, exist_ok=True)


def meta_path(csv_path: str) -> str:
  base = csv_path[:-4] if csv_path.endswith('.csv') else csv_path
  return base + '.meta.json'


def write_json(obj, path: str):
  _ensure_parent(path)
  with smart_open.open(path, 'w') as f:
    f.write(to_json(obj))


def write_csv(df: pd.DataFrame, path: str,
              metadata: models.RunMetadata | None = None):
  """Write a CSV with a header row and its metadata sibling."""
  _ensure_parent(path)
  with smart_open.open(path, 'w') as f:
    df.to_csv(f, index=False)
  if metadata is not None:
    write_json(metadata, meta_path(path))
  logger.info('Saved %s rows to %s', len(df), path)


def append_csv(df: pd.DataFrame, path: str):
  """Append rows to a local CSV time series, writing the header once."""
  _ensure_parent(path)
  exists = os.path.exists(path) and os.path.getsize(path) > 0
  df.to_csv(path, mode='a', header=not exists, index=False)


def read_csv(path: str) -> pd.DataFrame:
  with smart_open.open(path, 'r') as f:
    return pd.read_csv(f)


def save_matrix(path: str, matrix: np.ndarray, header: dict | None = None):
  """`<path>.npy` plus an optional `<path>.json` with scalars."""
  _ensure_parent(path)
  with smart_open.open(path + '.npy', 'wb') as f:
    np.save(f, np.asarray(matrix))
  if header is not None:
    write_json(header, path + '.json')


def load_matrix(path: str) -> np.ndarray:
  with smart_open.open(path + '.npy', 'rb') as f:
    return np.load(f)
