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

# Command line entry point:
#   PYTHONPATH=dgmcmc python dgmcmc/cli.py ordinal --budget steps --seed 1

import sys

from config import InvalidConfigurationError, get_config, parse_arguments
from diagnostics import OracleCheckFailed
import experiments
from logger import logger

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID_CONFIG = 2


def main(argv=None) -> int:
  args = parse_arguments(argv)
  try:
    config = get_config(args)
  except InvalidConfigurationError as e:
    logger.error('Invalid configuration: %s', e)
    return EXIT_INVALID_CONFIG

  try:
    experiments.run(config)
  except OracleCheckFailed as e:
    logger.error(e)
    return EXIT_CHECK_FAILED
  except (InvalidConfigurationError, ValueError) as e:
    logger.exception(e)
    return EXIT_INVALID_CONFIG
  return EXIT_OK


if __name__ == '__main__':
  sys.exit(main())
