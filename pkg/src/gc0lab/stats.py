"""Small statistics helpers (Wilson intervals via scipy)."""
from __future__ import annotations

import math

from scipy.stats import binomtest, norm


def wilson(failures: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    level = 2 * norm.cdf(z) - 1
    ci = binomtest(failures, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def wilson_sigma(failures: int, trials: int) -> float:
    """Standard deviation implied by the Wilson score interval at one z."""
    lo, hi = wilson(failures, trials, z=1.0)
    return (hi - lo) / 2


def within(measured_failures: int, trials: int, bound: float, z: float = 3.0) -> bool:
    """True if the bound is not excluded by the z-sigma Wilson lower limit."""
    lo, _ = wilson(measured_failures, trials, z)
    return lo <= bound or math.isclose(lo, bound)
