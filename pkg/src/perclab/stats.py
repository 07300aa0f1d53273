"""Shared statistics helpers: Wilson intervals and the universal
estimate-with-confidence return type."""

from __future__ import annotations

import math
from dataclasses import dataclass

# 99% two-sided normal quantile; Wilson intervals stay valid near 0 and 1.
Z99 = 2.5758293035489004


@dataclass(frozen=True)
class EstimateWithCI:
    """A point estimate with standard error and 99% confidence interval."""

    estimate: float
    stderr: float
    ci_low: float
    ci_high: float
    samples: int


def wilson_interval(successes: int, trials: int, z: float = Z99) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = (
        z
        * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials))
        / denom
    )
    return max(0.0, center - half), min(1.0, center + half)


def binomial_estimate(successes: int, trials: int) -> EstimateWithCI:
    lo, hi = wilson_interval(successes, trials)
    phat = successes / trials
    # Wilson half-width / z is a robust sigma even at 0 or n successes.
    sigma = max(math.sqrt(phat * (1.0 - phat) / trials), (hi - lo) / (2 * Z99))
    return EstimateWithCI(phat, sigma, lo, hi, trials)


def mean_estimate(values, z: float = Z99) -> EstimateWithCI:
    import numpy as np

    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n == 0:
        raise ValueError("no samples")
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateWithCI(mean, se, mean - z * se, mean + z * se, n)
