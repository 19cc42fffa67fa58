import logging
import os
import sys
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, TypeVar, Union

import numpy as np
import tabulate
from tqdm.contrib.concurrent import thread_map

from .logger import console_level

T = TypeVar("T")
R = TypeVar("R")

MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One splitmix64 output for the given 64-bit state."""
    z = (state + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *stream: int) -> int:
    """Derive an independent per-task seed from the master seed.

    Each element of ``stream`` is folded in with one splitmix64 step, so
    ``derive_seed(s, 3)`` and ``derive_seed(s, 3, 0)`` are different streams.
    """
    state = splitmix64(int(master_seed) & MASK64)
    for s in stream:
        state = splitmix64(state ^ (int(s) & MASK64))
    return state


def rng_for(master_seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *stream))


def round_half_up(value: Union[float, Fraction], ndigits: int = 0):
    """Round half away from zero at ``ndigits`` decimals (not banker's)."""
    if isinstance(value, Fraction):
        value = Decimal(value.numerator) / Decimal(value.denominator)
    else:
        value = Decimal(repr(float(value)))
    quantum = Decimal(1).scaleb(-ndigits)
    rounded = value.quantize(quantum, rounding=ROUND_HALF_UP)
    return int(rounded) if ndigits == 0 else float(rounded)


def percent_half_up(numerator, denominator) -> int:
    """Integer percentage ``round(100 * numerator / denominator)``, half up."""
    ratio = Fraction(numerator) / Fraction(denominator)
    return round_half_up(100 * ratio, 0)


def parallel_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    workers: int = 1,
    desc: Optional[str] = None,
) -> List[R]:
    """Order-preserving map; threads when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return thread_map(
        fn,
        items,
        max_workers=workers,
        desc=desc,
        disable=desc is None or console_level() > logging.DEBUG,
        file=sys.stderr,
    )


def tabulate_config(config: dict) -> str:
    """tabulate a resolved run configuration (one row per key)."""
    rows = [[k, config[k]] for k in sorted(config)]
    return tabulate.tabulate(rows, headers=["key", "value"])


def tabulate_environ_vars() -> str:
    """tabulate the environment variables colmax reads."""
    return tabulate.tabulate(
        [
            ["Python version", sys.version.split()[0]],
            ["COLMAX_SEED", os.environ.get("COLMAX_SEED")],
            ["COLMAX_WORKERS", os.environ.get("COLMAX_WORKERS")],
            ["COLMAX_OUTPUT_DIR", os.environ.get("COLMAX_OUTPUT_DIR")],
            ["OMP_NUM_THREADS", os.environ.get("OMP_NUM_THREADS")],
        ]
    )
