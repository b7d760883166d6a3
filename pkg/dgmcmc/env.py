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

import os
from dotenv import load_dotenv

load_dotenv()


def get_val(envvar):
  if envvar == 0:
    return envvar
  if not envvar or envvar == 'None':
    return ''
  return envvar


LOG_LEVEL = get_val(os.getenv('LOG_LEVEL')) or 'INFO'
"""Root log level."""

ENABLE_SAMPLER_DIAGNOSTICS = bool(
    get_val(os.getenv('ENABLE_SAMPLER_DIAGNOSTICS')))
"""True to emit per-step sampler diagnostics at DEBUG level."""

GIT_COMMIT = get_val(os.getenv('GIT_COMMIT'))

VERSION = '0.3.0'


def get_version() -> str:
  """Version string written into every metadata file."""
  if GIT_COMMIT:
    return f'{VERSION}+{GIT_COMMIT[:12]}'
  return VERSION


def get_output_dir():
  return get_val(os.getenv('DGMCMC_OUTPUT_DIR')) or 'output'
