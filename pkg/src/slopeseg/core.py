"""Data containers and segment cost primitives.

The model: a series y_1..y_n is approximated by a continuous piecewise-linear
function whose breakpoint values are restricted to a finite grid of states.
A segment from (tau, u) to (t, v) fits the points i = tau+1..t with the line
u + (v - u) * (i - tau) / (t - tau); the left endpoint value u is attached to
index tau and contributes no residual of its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ParseError(ValueError):
    """Malformed external input (CSV rows, flag values)."""


class ConfigError(ValueError):
    """Inconsistent option combination (constraint/pruning, grid spec)."""


class GuardError(ValueError):
    """Input rejected by a safety guard (size limits, too few points)."""


@dataclass(frozen=True)
class TimeSeries:
    """Observed series y_1..y_n, 1-indexed in formulas, float64 internally."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("series must be one-dimensional and non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series contains non-finite values")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class StateGrid:
    """Finite, strictly increasing set of admissible breakpoint values."""

    states: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.states, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("state grid must be one-dimensional and non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("state grid contains non-finite values")
        if arr.size > 1 and not np.all(np.diff(arr) > 0):
            raise ValueError("state grid must be strictly increasing")
        object.__setattr__(self, "states", arr)

    @property
    def m(self) -> int:
        return self.states.shape[0]

    def nearest_index(self, x: float) -> int:
        """Index of the grid value closest to x (lower index on ties)."""
        s = self.states
        j = int(np.searchsorted(s, x))
        if j == 0:
            return 0
        if j == s.size:
            return s.size - 1
        # s[j-1] <= x <= s[j]; prefer the lower index when equidistant
        return j - 1 if x - s[j - 1] <= s[j] - x else j

    @classmethod
    def from_range(cls, lo: float, hi: float, step: float = 1.0) -> "StateGrid":
        if step <= 0:
            raise ConfigError("state grid step must be positive")
        if hi < lo:
            raise ConfigError("state grid range is empty")
        k = int(np.floor((hi - lo) / step + 1e-12))
        return cls(lo + step * np.arange(k + 1))


@dataclass(frozen=True)
class PrefixSums:
    """Cumulative statistics S1_t = sum y_i, S2_t = sum y_i^2, Sp_t = sum i*y_i.

    Index 0 holds 0.0 so that any range statistic over (tau, t] is a single
    subtraction.
    """

    s1: np.ndarray
    s2: np.ndarray
    sp: np.ndarray

    @property
    def n(self) -> int:
        return self.s1.shape[0] - 1


def build_prefix_sums(y: TimeSeries | np.ndarray) -> PrefixSums:
    """Compute the three prefix-sum arrays for a series in one pass."""
    values = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=np.float64)
    n = values.shape[0]
    s1 = np.zeros(n + 1)
    s2 = np.zeros(n + 1)
    sp = np.zeros(n + 1)
    np.cumsum(values, out=s1[1:])
    np.cumsum(values * values, out=s2[1:])
    np.cumsum(np.arange(1, n + 1) * values, out=sp[1:])
    return PrefixSums(s1=s1, s2=s2, sp=sp)


def segment_cost_naive(y: np.ndarray, tau: int, t: int, u: float, v: float) -> float:
    """Sum of squared residuals of y_{tau+1..t} against the line u -> v.

    Direct O(t - tau) summation; reference implementation for the closed form.
    y is the raw series (index i of the formulas is y[i - 1]).
    """
    n = y.shape[0]
    if not (0 <= tau < t <= n):
        raise ValueError(f"invalid index range ({tau}, {t}] for n={n}")
    i = np.arange(tau + 1, t + 1)
    fitted = u + (v - u) * (i - tau) / (t - tau)
    resid = y[tau:t] - fitted
    return float(np.dot(resid, resid))


def segment_cost_fast(ps: PrefixSums, tau: int, t: int, u: float, v: float) -> float:
    """Closed-form segment cost from prefix sums, O(1).

    Algebraically identical to :func:`segment_cost_naive`; differs only by
    floating-point rounding.
    """
    if not (0 <= tau < t <= ps.n):
        raise ValueError(f"invalid index range ({tau}, {t}] for n={ps.n}")
    d = float(t - tau)
    sa = ps.s2[t] - ps.s2[tau]
    sb = ps.s1[t] - ps.s1[tau]
    sc = ps.sp[t] - ps.sp[tau]
    return float(
        sa
        - (2.0 / d) * ((u * t - v * tau) * sb + (v - u) * sc)
        + (v * v - u * u) / 2.0
        + (u * u + u * v + v * v) / 3.0 * d
        + (v - u) * (v - u) / (6.0 * d)
    )


def extend_value(acc: float, tau: int, t: int, u: float, v: float, ps: PrefixSums, beta: float) -> float:
    """Value of extending a partial fit of value ``acc`` at (tau, u) to (t, v).

    Equals ``acc + segment_cost(y, tau, t, u, v) + beta`` up to rounding, but
    evaluated with the exact floating-point operation order the compiled
    kernels use.  Pure-Python reference solvers built on this function can
    assert bitwise equality against kernel output; keep the expression in sync
    with ``_kernels``.
    """
    d = float(t - tau)
    sa = ps.s2[t] - ps.s2[tau]
    sb = ps.s1[t] - ps.s1[tau]
    sc = ps.sp[t] - ps.sp[tau]
    cu2 = d / 3.0 - 0.5 + 1.0 / (6.0 * d)
    cu1 = (2.0 / d) * (sc - t * sb)
    cuv = d / 3.0 - 1.0 / (3.0 * d)
    cv2 = d / 3.0 + 0.5 + 1.0 / (6.0 * d)
    cv1 = (2.0 / d) * (tau * sb - sc)
    return (acc + (cu2 * u + cu1) * u) + (cuv * v) * u + (sa + (cv2 * v + cv1) * v) + beta


@dataclass(frozen=True)
class Segmentation:
    """Solver output: right endpoints of segments plus one state per breakpoint.

    ``changepoints`` holds tau_1 < ... < tau_k < n followed by n itself;
    ``states`` holds the fitted values at tau_0 = 0, tau_1, ..., tau_{k+1} = n,
    so ``len(states) == len(changepoints) + 1``.
    """

    changepoints: np.ndarray
    states: np.ndarray
    objective: float

    def __post_init__(self):
        cps = np.asarray(self.changepoints, dtype=np.int64)
        sts = np.asarray(self.states, dtype=np.float64)
        if cps.ndim != 1 or sts.ndim != 1 or sts.size != cps.size + 1:
            raise ValueError("states length must equal changepoints length + 1")
        if cps.size > 1 and not np.all(np.diff(cps) > 0):
            raise ValueError("changepoints must be strictly increasing")
        object.__setattr__(self, "changepoints", cps)
        object.__setattr__(self, "states", sts)

    @property
    def segment_count(self) -> int:
        return self.changepoints.shape[0]

    def slopes(self) -> np.ndarray:
        """Per-segment slope, in value units per index."""
        bounds = np.concatenate(([0], self.changepoints))
        return np.diff(self.states) / np.diff(bounds)
