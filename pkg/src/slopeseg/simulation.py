"""Signal generators, noise models, metrics, and benchmark drivers.

Everything here is seeded and deterministic: a driver called twice with the
same arguments produces bit-identical reports.  Replicates and grid points
fan out to a thread pool when SLOPESEG_THREADS asks for more than one worker
(the solver kernels release the GIL); aggregation order never depends on
completion order.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field, replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .constraints import ConstraintSpec
from .core import ConfigError, Segmentation, StateGrid, TimeSeries
from .dp import SolverConfig, solve, warm_up
from .pruning import PruningSpec
from .variance import default_penalty

__all__ = [
    "SignalSpec",
    "NoiseSpec",
    "RunRecord",
    "ExperimentReport",
    "generate_signal",
    "add_noise",
    "reconstruct_signal",
    "mse",
    "default_grid",
    "penalty_scan",
    "pruning_efficiency_scan",
    "timing_scan",
    "robustness_scan",
    "ramp_profile",
]

SIGNAL_KINDS = ("piecewise_linear", "hat", "scenario", "sinusoid")
NOISE_FAMILIES = ("gaussian", "student")

# Benchmark scenarios: breakpoints as fractions of n (so they rescale with the
# series length) and integer knot values in [0, 60].  Scenario 1 is the
# two-segment hat whose slopes at n = 500 meet at about 153 degrees; the
# zigzag coordinates of 2..4 are fixtures of this package, chosen so that no
# two consecutive segments share a slope.
SCENARIOS = {
    1: ((0.5, 1.0), (0, 60, 0)),
    2: ((0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 1.0), (0, 40, 10, 50, 20, 60, 10, 30)),
    3: ((0.2, 0.35, 0.5, 0.65, 0.8, 1.0), (5, 20, 45, 60, 55, 30, 5)),
    4: ((0.12, 0.25, 0.38, 0.5, 0.63, 0.75, 0.88, 1.0), (30, 10, 40, 5, 55, 25, 60, 20, 45)),
}


@dataclass(frozen=True)
class SignalSpec:
    """A noiseless piecewise-linear (or sinusoidal) test signal of length n."""

    kind: str
    n: int
    changepoints: tuple = ()
    states: tuple = ()
    lo: float = 0.0
    hi: float = 1.0
    amplitude: float = 20.0
    period: float = 50.0
    offset: float = 30.0
    index: int = 1

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ConfigError(f"unknown signal kind {self.kind!r}; expected one of {SIGNAL_KINDS}")
        if self.n < 1:
            raise ConfigError("signal length must be positive")
        if self.kind == "scenario" and self.index not in SCENARIOS:
            raise ConfigError(f"scenario index must be one of {sorted(SCENARIOS)}")
        if self.kind == "hat" and self.n < 3:
            raise ConfigError("hat signal needs at least 3 points")

    @classmethod
    def piecewise_linear(cls, n: int, changepoints, states) -> "SignalSpec":
        return cls(kind="piecewise_linear", n=n, changepoints=tuple(int(c) for c in changepoints),
                   states=tuple(float(s) for s in states))

    @classmethod
    def hat(cls, n: int, lo: float, hi: float) -> "SignalSpec":
        return cls(kind="hat", n=n, lo=float(lo), hi=float(hi))

    @classmethod
    def scenario(cls, n: int, index: int) -> "SignalSpec":
        return cls(kind="scenario", n=n, index=int(index))

    @classmethod
    def sinusoid(cls, n: int, amplitude: float = 20.0, period: float = 50.0,
                 offset: float = 30.0) -> "SignalSpec":
        return cls(kind="sinusoid", n=n, amplitude=amplitude, period=period, offset=offset)

    def segment_count(self) -> int:
        if self.kind == "piecewise_linear":
            return len(self.changepoints)
        if self.kind == "hat":
            return 2
        if self.kind == "scenario":
            return len(SCENARIOS[self.index][0])
        raise ConfigError("sinusoids have no segment structure")


def _knot_eval(xp: np.ndarray, fp: np.ndarray, n: int) -> np.ndarray:
    return np.interp(np.arange(1, n + 1, dtype=np.float64), xp, fp)


def generate_signal(spec: SignalSpec) -> np.ndarray:
    """Evaluate the true signal at t = 1..n.

    Piecewise-linear kinds follow the model convention: the first segment
    starts at an unseen knot (0, s_0), so a single segment 0 -> 4 over n = 4
    yields (1, 2, 3, 4).  The hat is anchored at the observed endpoints
    instead: value lo at t = 1 and t = n, hi at the middle sample.
    """
    n = spec.n
    if spec.kind == "piecewise_linear":
        cps = np.asarray(spec.changepoints, dtype=np.float64)
        states = np.asarray(spec.states, dtype=np.float64)
        if cps.size == 0 or cps[-1] != n or np.any(np.diff(cps) <= 0):
            raise ConfigError("changepoints must increase and end at n")
        if states.size != cps.size + 1:
            raise ConfigError("need one more state than changepoints")
        return _knot_eval(np.concatenate(([0.0], cps)), states, n)
    if spec.kind == "hat":
        mid = (n + 1) // 2
        return _knot_eval(np.array([1.0, mid, n]), np.array([spec.lo, spec.hi, spec.lo]), n)
    if spec.kind == "scenario":
        fractions, states = SCENARIOS[spec.index]
        cps = [round(f * n) for f in fractions]
        if any(b - a < 1 for a, b in zip([0] + cps[:-1], cps)):
            raise ConfigError(f"scenario {spec.index} needs a longer series")
        return _knot_eval(np.array([0.0] + [float(c) for c in cps]),
                          np.asarray(states, dtype=np.float64), n)
    t = np.arange(1, n + 1, dtype=np.float64)
    return spec.offset + spec.amplitude * np.sin(2.0 * np.pi * t / spec.period)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive iid noise: gaussian(sigma) or student(df) rescaled to sigma.

    The Student draw is multiplied by sigma * sqrt((df - 2) / df) so its
    standard deviation equals the nominal sigma, which keeps the normalized
    penalty b = beta / (sigma^2 ln n) comparable across families.
    """

    family: str = "gaussian"
    sigma: float = 1.0
    df: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ConfigError(f"unknown noise family {self.family!r}; expected one of {NOISE_FAMILIES}")
        if self.sigma < 0:
            raise ConfigError("noise level must be nonnegative")
        if self.family == "student" and self.df <= 2:
            raise ConfigError("student noise needs df > 2 for the nominal sigma to be a standard deviation")

    def with_seed(self, seed: int) -> "NoiseSpec":
        return replace(self, seed=int(seed))

    def draw(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        if self.family == "gaussian":
            return rng.normal(0.0, self.sigma, n) if self.sigma > 0 else np.zeros(n)
        scale = self.sigma * math.sqrt((self.df - 2.0) / self.df)
        return rng.standard_t(self.df, n) * scale


def add_noise(signal: np.ndarray, noise: NoiseSpec) -> TimeSeries:
    signal = np.asarray(signal, dtype=np.float64)
    return TimeSeries(signal + noise.draw(signal.size))


def reconstruct_signal(seg: Segmentation, n: int) -> np.ndarray:
    """Fitted values at t = 1..n implied by a segmentation's knots."""
    xp = np.concatenate(([0.0], np.asarray(seg.changepoints, dtype=np.float64)))
    return _knot_eval(xp, np.asarray(seg.states, dtype=np.float64), n)


def mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigError(f"length mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(d @ d) / a.size


def default_grid(signal, step: float = 1.0, pad: float = 10.0) -> StateGrid:
    """Integer-spaced grid padded beyond the signal range to limit edge bias."""
    signal = np.asarray(signal, dtype=np.float64)
    return StateGrid.from_range(math.floor(signal.min()) - pad, math.ceil(signal.max()) + pad, step)


# ---------------------------------------------------------------------------
# Experiment drivers


@dataclass(frozen=True)
class RunRecord:
    run_id: int
    b: float
    beta: float
    mse: float
    segments: int
    scanned_proportion: float
    wall_ms: float
    seed: int
    scan: str
    n: int
    sigma: float
    strategy: str


CSV_COLUMNS = ("run_id", "b", "beta", "mse", "segments", "scanned_proportion",
               "wall_ms", "seed", "scan", "n", "sigma", "strategy")


@dataclass
class ExperimentReport:
    scan: str
    records: list
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def mean_by(self, groups, value: str) -> dict:
        """Mean of one record field grouped by one or more others.

        Single group name -> scalar keys; tuple of names -> tuple keys.
        """
        single = isinstance(groups, str)
        names = (groups,) if single else tuple(groups)
        sums: dict = {}
        for r in self.records:
            key = getattr(r, names[0]) if single else tuple(getattr(r, g) for g in names)
            s, c = sums.get(key, (0.0, 0))
            sums[key] = (s + getattr(r, value), c + 1)
        return {k: s / c for k, (s, c) in sums.items()}

    def to_csv(self, fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in (getattr(r, c) for c in CSV_COLUMNS)])

    def to_json(self) -> dict:
        return {
            "scan": self.scan,
            "meta": self.meta,
            "records": [{c: getattr(r, c) for c in CSV_COLUMNS} for r in self.records],
        }


def _workers() -> int:
    raw = os.environ.get("SLOPESEG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_tasks(fn, tasks):
    # results in task order, whatever the completion order
    workers = _workers()
    if workers == 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _timed_solve(y, grid, cfg):
    t0 = time.perf_counter()
    seg, tables = solve(y, grid, cfg)
    return seg, tables, (time.perf_counter() - t0) * 1e3


def _auto_strategy(constraint: ConstraintSpec) -> str:
    return "channel" if constraint.mode in ("none", "isotonic") else "none"


def penalty_scan(spec: SignalSpec, noise: NoiseSpec, b_grid, replicates: int,
                 constraint: ConstraintSpec | None = None, grid: StateGrid | None = None,
                 strategy: str | None = None) -> ExperimentReport:
    """MSE and segment count as the normalized penalty b = beta/(sigma^2 ln n) varies.

    Replicates are paired: the r-th series is shared by every b value, so the
    MSE curve differences are driven by the penalty alone.  meta carries the
    b minimizing the mean MSE.
    """
    constraint = constraint or ConstraintSpec()
    strategy = strategy or _auto_strategy(constraint)
    signal = generate_signal(spec)
    grid = grid or default_grid(signal)
    unit = noise.sigma**2 * math.log(spec.n)
    series = [add_noise(signal, noise.with_seed(noise.seed + r)) for r in range(replicates)]
    b_grid = [float(b) for b in b_grid]

    def run(task):
        run_id, rep, b = task
        cfg = SolverConfig(beta=b * unit, constraint=constraint, pruning=PruningSpec(strategy))
        seg, tables, wall = _timed_solve(series[rep], grid, cfg)
        return RunRecord(run_id, b, b * unit, mse(reconstruct_signal(seg, spec.n), signal),
                         seg.segment_count, tables.scanned_proportion, wall,
                         noise.seed + rep, "penalty", spec.n, noise.sigma, strategy)

    tasks = [(i, rep, b) for i, (rep, b) in
             enumerate((rep, b) for rep in range(replicates) for b in b_grid)]
    report = ExperimentReport("penalty", _map_tasks(run, tasks))
    curve = report.mean_by("b", "mse")
    report.meta["argmin_b"] = min(curve, key=curve.get)
    report.meta["mean_mse_by_b"] = {repr(k): v for k, v in sorted(curve.items())}
    return report


def pruning_efficiency_scan(spec: SignalSpec, sigmas, strategies=("none", "channel", "inequality"),
                            replicates: int = 5, seed: int = 0, family: str = "gaussian",
                            grid: StateGrid | None = None) -> ExperimentReport:
    """Scanned-couple proportion per pruning strategy and noise level.

    Series are paired across strategies (same seed per (sigma, replicate)),
    beta is the 2 sigma^2 ln n default computed from the known sigma, and the
    constraint stays off so every strategy is admissible.
    """
    signal = generate_signal(spec)
    grid = grid or default_grid(signal)
    sigmas = [float(s) for s in sigmas]

    def run(task):
        run_id, i_sig, rep, strategy = task
        sigma = sigmas[i_sig]
        noise = NoiseSpec(family=family, sigma=sigma, seed=seed + 1000 * i_sig + rep)
        beta = default_penalty(sigma**2, spec.n)
        cfg = SolverConfig(beta=beta, pruning=PruningSpec(strategy))
        seg, tables, wall = _timed_solve(add_noise(signal, noise), grid, cfg)
        return RunRecord(run_id, beta / (sigma**2 * math.log(spec.n)), beta,
                         mse(reconstruct_signal(seg, spec.n), signal), seg.segment_count,
                         tables.scanned_proportion, wall, noise.seed, "pruning",
                         spec.n, sigma, strategy)

    tasks = [(i, i_sig, rep, strat)
             for i, (i_sig, rep, strat) in
             enumerate((i_sig, rep, strat) for i_sig in range(len(sigmas))
                       for rep in range(replicates) for strat in strategies)]
    report = ExperimentReport("pruning", _map_tasks(run, tasks))
    means = report.mean_by(("sigma", "strategy"), "scanned_proportion")
    report.meta["mean_proportion"] = {f"{s}:{strat}": v for (s, strat), v in sorted(means.items())}
    return report


def timing_scan(spec: SignalSpec, n_grid, noise: NoiseSpec, replicates: int = 3,
                strategy: str = "channel", step: float = 1.0) -> ExperimentReport:
    """Wall time versus series length with a fitted log-log slope.

    The spec's kind-level parameters are reused at every n (scenario breaks
    rescale; explicit piecewise changepoints do not and are rejected by the
    generator).  Kernels are compiled before the first measurement so JIT
    cost never lands in a sample; the fitted slope uses the per-n median.
    """
    warm_up()
    n_grid = [int(n) for n in n_grid]
    beta_of = {n: default_penalty(noise.sigma**2, n) for n in n_grid}

    def run(task):
        run_id, n, rep = task
        sized = replace(spec, n=n)
        signal = generate_signal(sized)
        cfg = SolverConfig(beta=beta_of[n], pruning=PruningSpec(strategy))
        y = add_noise(signal, noise.with_seed(noise.seed + rep))
        seg, tables, wall = _timed_solve(y, default_grid(signal, step=step), cfg)
        return RunRecord(run_id, 2.0, beta_of[n], mse(reconstruct_signal(seg, n), signal),
                         seg.segment_count, tables.scanned_proportion, wall,
                         noise.seed + rep, "timing", n, noise.sigma, strategy)

    tasks = [(i, n, rep) for i, (n, rep) in
             enumerate((n, rep) for n in n_grid for rep in range(replicates))]
    report = ExperimentReport("timing", _map_tasks(run, tasks))
    medians = {}
    for n in n_grid:
        walls = sorted(r.wall_ms for r in report.records if r.n == n)
        medians[n] = walls[len(walls) // 2]
    slope = float(np.polyfit(np.log([float(n) for n in n_grid]),
                             np.log([medians[n] for n in n_grid]), 1)[0])
    report.meta["loglog_slope"] = slope
    report.meta["median_wall_ms"] = {str(n): medians[n] for n in n_grid}
    return report


def robustness_scan(spec: SignalSpec, noise: NoiseSpec, beta_grid,
                    variants: dict, replicates: int = 10,
                    grid: StateGrid | None = None) -> ExperimentReport:
    """Paired comparison of constraint variants over a grid of absolute betas.

    variants maps a label to a ConstraintSpec; every (beta, label) cell sees
    the same replicate series.  The strategy column carries the label.
    """
    signal = generate_signal(spec)
    grid = grid or default_grid(signal)
    unit = noise.sigma**2 * math.log(spec.n)
    series = [add_noise(signal, noise.with_seed(noise.seed + r)) for r in range(replicates)]
    beta_grid = [float(b) for b in beta_grid]
    labels = list(variants)

    def run(task):
        run_id, rep, beta, label = task
        constraint = variants[label]
        cfg = SolverConfig(beta=beta, constraint=constraint,
                           pruning=PruningSpec(_auto_strategy(constraint)))
        seg, tables, wall = _timed_solve(series[rep], grid, cfg)
        return RunRecord(run_id, beta / unit if unit > 0 else math.nan, beta,
                         mse(reconstruct_signal(seg, spec.n), signal), seg.segment_count,
                         tables.scanned_proportion, wall, noise.seed + rep, "robustness",
                         spec.n, noise.sigma, label)

    tasks = [(i, rep, beta, label) for i, (rep, beta, label) in
             enumerate((rep, beta, label) for rep in range(replicates)
                       for beta in beta_grid for label in labels)]
    return ExperimentReport("robustness", _map_tasks(run, tasks))


def ramp_profile(spacing: float = 0.1, end: float = 25.0, base: float = 10.0,
                 rise_start: float = 8.0, top: float = 200.0):
    """Synthetic radial intensity profile: flat plateau, then a linear rise.

    Returns (distance_mm, intensity) with the plateau at ``base`` up to and
    including ``rise_start`` and a straight climb to ``top`` at ``end``.  With
    the default geometry the only change sits exactly at 8.0 mm, which makes
    the fixture's inhibition diameter 16.0 mm.
    """
    k = round(end / spacing)
    distance = np.arange(k + 1, dtype=np.float64) * spacing
    rise = base + (top - base) * (distance - rise_start) / (end - rise_start)
    return distance, np.where(distance <= rise_start, base, rise)
