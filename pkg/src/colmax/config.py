# -*- coding: utf-8 -*-
import logging
import os
from typing import Dict, Optional

from .errors import IoFailure
from .logger import LOGGER_NAME

logger = logging.getLogger(LOGGER_NAME)

OUTPUT_DIR = os.environ.get(
    "COLMAX_OUTPUT_DIR", os.path.join(os.path.abspath("."), "output")
)
SEED_ENV = "COLMAX_SEED"
WORKERS_ENV = "COLMAX_WORKERS"

DEFAULT_SEED = 0
DEFAULT_K = 10
DEFAULT_MINING_THRESHOLD = 0.95
DEFAULT_PCA_DIM = 50
DEFAULT_TEMPERATURE = 1.0


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, DEFAULT_SEED))


def default_workers() -> int:
    return int(os.environ.get(WORKERS_ENV, os.cpu_count() or 1))


def load_config_file(fname: Optional[str]) -> Dict[str, str]:
    """Read a flat ``key = value`` config file.

    Blank lines, ``#`` comments and ``[section]`` headers are skipped, values
    may be quoted and keys are normalised to python identifiers
    (``avg-tokens`` -> ``avg_tokens``).
    """
    if not fname:
        return {}
    try:
        with open(fname, "r") as f:
            lines = f.readlines()
    except OSError as e:
        raise IoFailure(f"cannot read config file {fname}: {e}") from e

    config = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            logger.warning(f"Skipping malformed config line {lineno}: {raw!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
            value = value[1:-1]
        config[key.replace("-", "_")] = value
    return config
