"""Penalized segmentation solver over a finite state grid.

``slope_op`` fills the dynamic-programming tables, ``backtrack`` recovers the
optimal segmentation, and ``brute_force_oracle`` provides an exhaustive
reference for small instances.  Ties are always resolved toward the smallest
previous time, then the smallest previous state index, so equal-cost runs are
reproducible and pruned runs can be compared against unpruned ones
segmentation-by-segmentation, not just by objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .constraints import ConstraintSpec, memory_update, validity
from .core import (
    ConfigError,
    GuardError,
    PrefixSums,
    Segmentation,
    StateGrid,
    TimeSeries,
    build_prefix_sums,
    extend_value,
)
from .pruning import PruningSpec, compute_envelopes, unpruned_couples

_MODE_CODE = {"none": 0, "isotonic": 1, "unimodal": 2, "minangle": 3}


@dataclass(frozen=True)
class SolverConfig:
    """Penalty plus constraint and pruning selection for one solve."""

    beta: float = 0.0
    constraint: ConstraintSpec = field(default_factory=ConstraintSpec)
    pruning: PruningSpec = field(default_factory=PruningSpec)

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0.0:
            raise ConfigError(f"beta must be finite and >= 0, got {self.beta}")
        mode = self.constraint.mode
        strategy = self.pruning.strategy
        if strategy == "inequality" and mode != "none":
            raise ConfigError("inequality pruning requires constraint mode 'none'")
        if strategy == "channel" and mode not in ("none", "isotonic"):
            raise ConfigError("channel pruning requires constraint mode 'none' or 'isotonic'")


@dataclass
class DPTables:
    """Solver state: value table, backpointers, and scan instrumentation.

    ``q[t, v]`` is the best penalized cost of fitting ``y[:t]`` with the fit
    pinned to state ``v`` at time t (``q[0, :] = -beta``).  ``cp[t-1, v]`` and
    ``u[t-1, v]`` give the previous breakpoint time and state index chosen for
    cell (t, v).  ``scanned`` counts evaluated (t', u) candidates; an unpruned
    run scans exactly ``couples_total = sum_t t * m**2`` of them.
    """

    q: np.ndarray
    cp: np.ndarray
    u: np.ndarray
    scanned: int
    couples_total: int

    @property
    def n(self) -> int:
        return self.q.shape[0] - 1

    @property
    def scanned_proportion(self) -> float:
        return self.scanned / self.couples_total


def _as_series(y) -> TimeSeries:
    return y if isinstance(y, TimeSeries) else TimeSeries(np.asarray(y, dtype=np.float64))


def _as_grid(grid) -> StateGrid:
    return grid if isinstance(grid, StateGrid) else StateGrid(np.asarray(grid, dtype=np.float64))


def slope_op(y, grid, config: SolverConfig | None = None) -> DPTables:
    """Fill the DP tables for continuous piecewise-linear least squares.

    Every cell minimizes over admissible previous couples (t', u); pruning
    strategies only skip candidates that provably cannot change any cell, so
    the tables are identical across strategies (bit for bit, since all kernels
    share one value expression).
    """
    ts = _as_series(y)
    g = _as_grid(grid)
    cfg = config if config is not None else SolverConfig()
    ps = build_prefix_sums(ts.values)
    mode = _MODE_CODE[cfg.constraint.mode]
    angle = float(cfg.constraint.min_angle_degrees)
    beta = float(cfg.beta)
    strategy = cfg.pruning.strategy
    if strategy == "none":
        q, cp, u, scanned = _kernels.dp_full(ps.s1, ps.s2, ps.sp, g.states, beta, mode, angle)
    elif strategy == "channel":
        if g.m > 1:
            steps = np.diff(g.states)
            uniform = bool(np.all(steps == steps[0]))
            step = float(steps[0])
        else:
            uniform = True
            step = 1.0
        q, cp, u, scanned = _kernels.dp_channel(
            ps.s1,
            ps.s2,
            ps.sp,
            g.states,
            beta,
            cfg.constraint.mode == "isotonic",
            uniform,
            float(g.states[0]),
            step,
        )
    else:
        n = ts.n
        alpha_p = np.zeros(n + 1)
        gamma_p = np.zeros(n + 1)
        alpha_m = np.zeros(n + 1)
        gamma_m = np.zeros(n + 1)
        for t in range(1, n):
            env = compute_envelopes(ps, t)
            alpha_p[t] = env.alpha_plus
            gamma_p[t] = env.gamma_plus
            alpha_m[t] = env.alpha_minus
            gamma_m[t] = env.gamma_minus
        q, cp, u, scanned, _ = _kernels.dp_inequality(
            ps.s1, ps.s2, ps.sp, g.states, beta, alpha_p, gamma_p, alpha_m, gamma_m
        )
    return DPTables(
        q=q,
        cp=cp,
        u=u,
        scanned=int(scanned),
        couples_total=unpruned_couples(ts.n, g.m),
    )


def backtrack(tables: DPTables, grid) -> Segmentation:
    """Walk the backpointers from argmin_v q(n, v) to the start."""
    g = _as_grid(grid)
    n = tables.n
    v = int(np.argmin(tables.q[n]))
    objective = float(tables.q[n, v])
    if not np.isfinite(objective):
        raise GuardError("no feasible segmentation for this constraint")
    cps = [n]
    sts = [g.states[v]]
    t = n
    while t > 0:
        tp = int(tables.cp[t - 1, v])
        ui = int(tables.u[t - 1, v])
        if tp > 0:
            cps.append(tp)
        sts.append(g.states[ui])
        t, v = tp, ui
    cps.reverse()
    sts.reverse()
    return Segmentation(
        changepoints=np.asarray(cps, dtype=np.int64),
        states=np.asarray(sts, dtype=np.float64),
        objective=objective,
    )


def solve(y, grid, config: SolverConfig | None = None) -> tuple[Segmentation, DPTables]:
    """One-call convenience: slope_op followed by backtrack."""
    g = _as_grid(grid)
    tables = slope_op(y, g, config)
    return backtrack(tables, g), tables


def slope_op_fixed_k(y, grid, k: int, constraint: ConstraintSpec | None = None) -> Segmentation:
    """Best fit with exactly ``k`` segments; no penalty term in the objective."""
    ts = _as_series(y)
    g = _as_grid(grid)
    spec = constraint if constraint is not None else ConstraintSpec()
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ConfigError(f"segment count must be an integer, got {k!r}")
    if k < 1 or k > ts.n:
        raise ConfigError(f"segment count must be in [1, n={ts.n}], got {k}")
    # two int32 backpointer tables of shape (k, n+1, m)
    if 2 * k * (ts.n + 1) * g.m * 4 > 1 << 31:
        raise GuardError(f"fixed-k tables too large for k={k}, n={ts.n}, m={g.m}")
    ps = build_prefix_sums(ts.values)
    qk, cpt, cpu = _kernels.dp_fixed_k(
        ps.s1, ps.s2, ps.sp, g.states, int(k), _MODE_CODE[spec.mode], float(spec.min_angle_degrees)
    )
    n = ts.n
    v = int(np.argmin(qk[n]))
    objective = float(qk[n, v])
    if not np.isfinite(objective):
        raise GuardError("no feasible segmentation with that many segments")
    cps = [n]
    sts = [g.states[v]]
    t = n
    for layer in range(k, 0, -1):
        tp = int(cpt[layer - 1, t, v])
        ui = int(cpu[layer - 1, t, v])
        if tp > 0:
            cps.append(tp)
        sts.append(g.states[ui])
        t, v = tp, ui
    cps.reverse()
    sts.reverse()
    return Segmentation(
        changepoints=np.asarray(cps, dtype=np.int64),
        states=np.asarray(sts, dtype=np.float64),
        objective=objective,
    )


def evaluate_segmentation(y, seg: Segmentation, beta: float = 0.0) -> float:
    """Residual sum of squares of ``seg`` plus beta per interior changepoint."""
    ts = _as_series(y)
    if int(seg.changepoints[-1]) != ts.n:
        raise ValueError(f"segmentation ends at {seg.changepoints[-1]}, series has n={ts.n}")
    ps = build_prefix_sums(ts.values)
    from .core import segment_cost_fast

    total = 0.0
    prev = 0
    for i, t in enumerate(seg.changepoints):
        total += segment_cost_fast(ps, prev, int(t), float(seg.states[i]), float(seg.states[i + 1]))
        prev = int(t)
    return total + beta * (seg.segment_count - 1)


def reference_tables(y, grid, config: SolverConfig | None = None) -> DPTables:
    """Plain-Python transcription of the recursion, for testing the kernels.

    Same cell semantics (one value and one constraint-memory slot per cell),
    same tie-break, same value arithmetic via ``extend_value``; no pruning and
    no hoisting.  Output matches ``slope_op`` bitwise.
    """
    ts = _as_series(y)
    g = _as_grid(grid)
    cfg = config if config is not None else SolverConfig()
    spec = cfg.constraint
    beta = float(cfg.beta)
    ps = build_prefix_sums(ts.values)
    n, m = ts.n, g.m
    q = np.full((n + 1, m), np.inf)
    q[0, :] = -beta
    cp = np.full((n, m), -1, dtype=np.int64)
    pu = np.full((n, m), -1, dtype=np.int64)
    if spec.mode == "unimodal":
        init = 1.0
    elif spec.mode == "minangle":
        init = np.inf
    else:
        init = 0.0
    mem = np.full((n + 1, m), init)
    for t in range(1, n + 1):
        for v in range(m):
            sv = float(g.states[v])
            best = np.inf
            bt = -1
            bu = -1
            for tp in range(t):
                for u in range(m):
                    if not np.isfinite(q[tp, u]):
                        continue
                    su = float(g.states[u])
                    if not validity(spec, mem[tp, u], tp, su, t, sv):
                        continue
                    val = extend_value(q[tp, u], tp, t, su, sv, ps, beta)
                    if val < best:
                        best, bt, bu = val, tp, u
            q[t, v] = best
            cp[t - 1, v] = bt
            pu[t - 1, v] = bu
            if bt >= 0:
                mem[t, v] = memory_update(spec, mem[bt, bu], bt, float(g.states[bu]), t, sv)
    return DPTables(q=q, cp=cp, u=pu, scanned=unpruned_couples(n, m), couples_total=unpruned_couples(n, m))


def path_enumeration_objective(y, grid, config: SolverConfig | None = None) -> float:
    """Optimum over explicit paths, constraints checked along each path.

    For none/isotonic this coincides with the DP optimum.  For the memory
    modes it is a lower bound: the DP keeps one memory slot per cell, so it
    may miss a path whose prefix was shadowed by a cheaper, more constrained
    one (in practice rare; see the oracle tests for measured gaps).
    """
    ts = _as_series(y)
    g = _as_grid(grid)
    cfg = config if config is not None else SolverConfig()
    _guard_enumeration(ts.n, g.m)
    ps = build_prefix_sums(ts.values)
    best, _, _, _, _ = _kernels.enumerate_paths(
        ps.s1,
        ps.s2,
        ps.sp,
        g.states,
        float(cfg.beta),
        _MODE_CODE[cfg.constraint.mode],
        float(cfg.constraint.min_angle_degrees),
    )
    return float(best)


def _guard_enumeration(n: int, m: int) -> None:
    if n > 12 or m > 5:
        raise GuardError(f"exhaustive oracle limited to n <= 12 and m <= 5, got n={n}, m={m}")


def brute_force_oracle(y, grid, config: SolverConfig | None = None) -> Segmentation:
    """Exhaustive reference solver for small instances.

    For none/isotonic, enumerates every changepoint vector with every state
    assignment and keeps the best one passing the constraint test.  The
    unimodal and min-angle modes instead use the plain-Python cell recursion:
    their semantics are defined through one memory slot per cell (the memory
    of the best arrival, not of the path being scored), so a per-path
    enumeration solves a strictly easier problem and can land below the
    solver.  ``path_enumeration_objective`` exposes that lower bound.
    """
    ts = _as_series(y)
    g = _as_grid(grid)
    cfg = config if config is not None else SolverConfig()
    _guard_enumeration(ts.n, g.m)
    if cfg.constraint.mode in ("unimodal", "minangle"):
        return backtrack(reference_tables(ts, g, cfg), g)
    ps = build_prefix_sums(ts.values)
    best, blen, bt, bs, _ = _kernels.enumerate_paths(
        ps.s1,
        ps.s2,
        ps.sp,
        g.states,
        float(cfg.beta),
        _MODE_CODE[cfg.constraint.mode],
        float(cfg.constraint.min_angle_degrees),
    )
    if not np.isfinite(best):
        raise GuardError("no feasible segmentation for this constraint")
    return Segmentation(
        changepoints=np.asarray(bt[1:blen], dtype=np.int64),
        states=g.states[bs[:blen]],
        objective=float(best),
    )


def warm_up() -> None:
    """Compile all kernels on a tiny instance so timings exclude JIT cost."""
    y = np.array([0.0, 1.0, 0.0])
    g = StateGrid(np.array([0.0, 1.0]))
    for mode in ("none", "isotonic", "unimodal", "minangle"):
        cfg = SolverConfig(beta=0.5, constraint=ConstraintSpec(mode=mode))
        solve(y, g, cfg)
    for strategy in ("channel", "inequality"):
        cfg = SolverConfig(beta=0.5, pruning=PruningSpec(strategy=strategy))
        solve(y, g, cfg)
    slope_op_fixed_k(y, g, 2)
    brute_force_oracle(y, g, SolverConfig(beta=0.5))
