"""Noise level estimation for piecewise-linear series.

Difference-based estimators in the Hall-Kay-Titterington family plus a MAD
variant.  The order-3 weights nearly annihilate constants, so the plain
estimator is robust to level shifts but inflates on sloped data; applying the
same weights to first differences (hall_diff_estimator) kills linear trends
too, at the price of a known variance inflation that the normalizer removes.

hall_estimator and hall_diff_estimator return variances, mad_estimator
returns a standard deviation; callers that mix them should square or sqrt
accordingly (the CLI reports both forms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, TimeSeries

__all__ = [
    "HallCoefficients",
    "HALL",
    "hall_estimator",
    "hall_diff_estimator",
    "mad_estimator",
    "default_penalty",
]


@dataclass(frozen=True)
class HallCoefficients:
    """Order-3 difference filter weights.

    Rounded to the published four decimals, so sum(d) is 1e-4 rather than an
    exact zero and "annihilates constants" holds only to that accuracy.
    ``delta`` is the standard-deviation inflation the filter applied to first
    differences of white noise: delta^2 = d0^2 + (d1-d0)^2 + (d2-d1)^2
    + (d3-d2)^2 + d3^2.
    """

    d0: float = 0.1942
    d1: float = 0.2809
    d2: float = 0.3832
    d3: float = -0.8582
    delta: float = 1.527507

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.d0, self.d1, self.d2, self.d3])

    def recompute_delta(self) -> float:
        w = self.weights
        steps = np.concatenate(([w[0]], np.diff(w), [-w[3]]))
        return math.sqrt(float(steps @ steps))


HALL = HallCoefficients()


def _values(y) -> np.ndarray:
    if isinstance(y, TimeSeries):
        return y.values
    return TimeSeries(np.asarray(y, dtype=np.float64)).values


def _filtered(values: np.ndarray, coeffs: HallCoefficients) -> np.ndarray:
    w = coeffs.weights
    return w[0] * values[:-3] + w[1] * values[1:-2] + w[2] * values[2:-1] + w[3] * values[3:]


def hall_estimator(y, coeffs: HallCoefficients = HALL) -> float:
    """Variance estimate from the order-3 filter applied to the raw series.

    Unbiased on piecewise-constant data; on sloped data the filter leaks the
    trend and the estimate inflates (roughly sigma^2 + 2.33 * slope^2 per
    unit-spaced sample), which is the reason hall_diff_estimator exists.
    """
    values = _values(y)
    if values.size < 4:
        raise ConfigError("variance estimation needs at least 4 observations")
    f = _filtered(values, coeffs)
    return float(f @ f) / f.size


def hall_diff_estimator(y, coeffs: HallCoefficients = HALL) -> float:
    """Variance estimate from the order-3 filter applied to first differences.

    Differencing makes linear trends look constant, and the filter nearly
    annihilates constants, so the estimate tracks the noise level on sloped
    and smoothly varying signals alike.  Filtering differences of white noise
    inflates the second moment by delta^2, hence the normalizer.
    """
    values = _values(y)
    if values.size < 5:
        raise ConfigError("difference-based variance estimation needs at least 5 observations")
    f = _filtered(np.diff(values), coeffs)
    return float(f @ f) / (f.size * coeffs.delta**2)


def mad_estimator(y) -> float:
    """Robust standard-deviation estimate from first differences.

    median(|z - median(z)|) / 0.67449 rescales the MAD of the differences to
    a Gaussian standard deviation; the sqrt(2) removes the variance doubling
    that differencing introduces.  Returns sigma, not sigma^2.
    """
    values = _values(y)
    if values.size < 2:
        raise ConfigError("mad estimation needs at least 2 observations")
    z = np.diff(values)
    return float(np.median(np.abs(z - np.median(z)))) / 0.67449 / math.sqrt(2.0)


def default_penalty(sigma2: float, n: int) -> float:
    """Per-change penalty 2 * sigma^2 * ln(n) used when no beta is given."""
    return 2.0 * sigma2 * math.log(n)
