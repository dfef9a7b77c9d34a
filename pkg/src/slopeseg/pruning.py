"""Candidate reduction rules for the grid-constrained slope solver.

Two families:

* channel: per predecessor column, the monotone boundary runs of the value
  column plus the unconstrained minimizer of the segment cost bracket an
  interval that must contain the best starting state.  Re-admits couples at
  every step, so nothing is lost permanently.
* inequality: couples whose value is already beaten at time t, and provably
  stays beaten at every later time thanks to affine envelopes of the future
  data, are removed for good.  Same-state couples get a cheaper dedicated
  comparison that keeps at most one of them alive per target state.

These functions are the reference implementations; the solver kernels inline
the same arithmetic for speed and are held to them by transparency tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, PrefixSums

STRATEGIES = ("none", "channel", "inequality")

# Extra slack applied to envelope intercepts so the sandwich property survives
# floating-point rounding; pruning stays sound, merely a hair less aggressive.
ENVELOPE_SLACK = 1e-9


@dataclass(frozen=True)
class PruningSpec:
    strategy: str = "none"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown pruning strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )


def unpruned_couples(n: int, m: int) -> int:
    """Total (t', u) couples scanned by the plain double loop: sum_t t * m^2."""
    return m * m * n * (n + 1) // 2


def vstar(ps: PrefixSums, tprime: int, t: int, vtilde: float) -> float:
    """Unconstrained minimizer over u of the segment cost from (t', u) to (t, vtilde).

    Requires t - t' >= 2; for a single-point segment the cost does not depend
    on the starting value.
    """
    d = t - tprime
    if d < 2:
        raise ValueError("vstar needs a segment of at least two points")
    if not 0 <= tprime < t <= ps.n:
        raise ValueError(f"invalid index range ({tprime}, {t}] for n={ps.n}")
    # sum_{i=t'+1..t} (t - i) y_i from the prefix sums
    w = t * (ps.s1[t] - ps.s1[tprime]) - (ps.sp[t] - ps.sp[tprime])
    return 6.0 * w / ((d - 1.0) * (2.0 * d - 1.0)) - vtilde * (d + 1.0) / (2.0 * d - 1.0)


def update_channel_column(q_column: np.ndarray) -> tuple[int, int]:
    """Boundary indices (v_l, v_u) of the monotone runs of a value column.

    The column is non-increasing on [0..v_l] and non-decreasing on [v_u..m-1],
    with v_l <= v_u.  Entirely non-decreasing columns collapse to the first
    index, entirely non-increasing ones to the last; mixed columns take the
    longest non-increasing prefix and the start of the non-decreasing suffix,
    lifted to v_l when a plateau makes the runs overlap.
    """
    q = np.asarray(q_column, dtype=np.float64)
    m = q.shape[0]
    if m == 1:
        return 0, 0
    dq = np.diff(q)
    if np.all(dq >= 0):
        return 0, 0
    if np.all(dq <= 0):
        return m - 1, m - 1
    vl = 0
    while vl < m - 1 and q[vl + 1] <= q[vl]:
        vl += 1
    vu = m - 1
    while vu > 0 and q[vu - 1] <= q[vu]:
        vu -= 1
    return vl, max(vu, vl)


def channel_interval(
    vl: int,
    vu: int,
    vstar_index: int | None,
    v_index: int | None = None,
) -> tuple[int, int]:
    """Inclusive index interval guaranteed to contain the best starting state.

    ``vstar_index`` is the grid index nearest the unconstrained cost minimizer
    (None for single-point segments, where the cost is flat in u).  Passing
    ``v_index`` additionally clips the scan to states <= v for isotonic fits;
    when the whole interval sits above v the best admissible state is v itself.
    """
    if vstar_index is None:
        lo, hi = vl, vu
    else:
        lo, hi = min(vl, vstar_index), max(vu, vstar_index)
    if v_index is not None:
        lo, hi = min(lo, v_index), min(hi, v_index)
    return lo, hi


@dataclass(frozen=True)
class EnvelopeBounds:
    """Affine sandwich of the forward weighted means g_t(T) for T in (t, n].

    alpha_plus * T + gamma_plus <= g_t(T) <= alpha_minus * T + gamma_minus
    holds for every sampled T; both lines share the least-squares slope and
    differ only in intercept.
    """

    t: int
    alpha_plus: float
    gamma_plus: float
    alpha_minus: float
    gamma_minus: float


def g_values(ps: PrefixSums, t: int) -> np.ndarray:
    """g_t(T) = sum_{i=t+1..T-1} y_i (T - i) / (T - t) for T = t+1..n.

    g_t(t+1) = 0 by convention (empty sum).  Evaluated from prefix sums, so
    each entry costs O(1).
    """
    n = ps.n
    if not 0 <= t < n:
        raise ValueError(f"t must lie in [0, n) for n={n}")
    T = np.arange(t + 1, n + 1, dtype=np.float64)
    # the entry for T aggregates data up to T-1, hence the [t:n] windows
    num = T * (ps.s1[t:n] - ps.s1[t]) - (ps.sp[t:n] - ps.sp[t])
    return num / (T - t)


def compute_envelopes(ps: PrefixSums, t: int) -> EnvelopeBounds:
    """Fit the least-squares line through (T, g_t(T)) and shift it to bound g.

    The lower envelope is the line dropped by the largest positive residual,
    the upper envelope the line raised by the largest negative one, each with
    a tiny extra slack so the bounds hold under floating-point arithmetic.
    """
    g = g_values(ps, t)
    T = np.arange(t + 1, ps.n + 1, dtype=np.float64)
    if T.shape[0] == 1:
        slope, intercept = 0.0, float(g[0])
    else:
        tbar = T.mean()
        gbar = g.mean()
        denom = float(np.sum((T - tbar) ** 2))
        slope = float(np.sum((T - tbar) * (g - gbar)) / denom)
        intercept = gbar - slope * tbar
    resid = g - (slope * T + intercept)
    pad = ENVELOPE_SLACK * (1.0 + float(np.max(np.abs(g), initial=0.0)))
    return EnvelopeBounds(
        t=t,
        alpha_plus=slope,
        gamma_plus=intercept + float(resid.min()) - pad,
        alpha_minus=slope,
        gamma_minus=intercept + float(resid.max()) + pad,
    )


def weighted_start_sum(ps: PrefixSums, tprime: int, t: int) -> float:
    """sum_{i=t'+1..t} (i - t') y_i, used by the inequality certificate."""
    return float((ps.sp[t] - ps.sp[tprime]) - tprime * (ps.s1[t] - ps.s1[tprime]))


def inequality_prune(
    env: EnvelopeBounds,
    ps: PrefixSums,
    tprime: int,
    u: float,
    t: int,
    v: float,
    n: int,
) -> bool:
    """Certificate that a beaten couple (t', u) stays beaten for target v at all T > t.

    Caller must already have observed the trigger
    ``Q_{t'}(u) + cost((t', t], u, v) > Q_t(v)`` and u != v.  The test checks
    the sign of an affine function at T = t+1 and T = n, using the lower
    envelope when v > u and the upper envelope when v < u.
    """
    if u == v:
        raise ValueError("same-state couples are handled by same_state_prune")
    if env.t != t:
        raise ValueError("envelope bounds were computed for a different t")
    base = (
        tprime * (u + 2.0 * v) / 6.0
        - (v - u) / (12.0 * (t - tprime))
        + weighted_start_sum(ps, tprime, t) / (t - tprime)
    )
    slope_part = (u + 2.0 * v) / 6.0
    if v > u:
        a = env.alpha_plus - slope_part
        c = base + env.gamma_plus
        return bool(a * (t + 1) + c >= 0.0 and a * n + c >= 0.0)
    a = env.alpha_minus - slope_part
    c = base + env.gamma_minus
    return bool(a * (t + 1) + c <= 0.0 and a * n + c <= 0.0)


def same_state_prune(old_value: float, q_t_v: float) -> str:
    """Arbitrate between the surviving same-state couple and the fresh cell.

    ``old_value`` is Q_{t'}(v) + cost((t', t], v, v) for the unique alive
    couple (t', v); ``q_t_v`` is the freshly computed Q_t(v).  Returns "old"
    when the old couple is beaten and should be dropped, "new" when the fresh
    position t itself never needs to be considered for state v.  Exactly one
    of the two always fires.
    """
    return "old" if old_value > q_t_v else "new"
