"""Shape constraints on the fitted piecewise-linear function.

Each constraint is expressed through a per-breakpoint memory value and a
validity predicate: when extending an inferred function that arrived at
(t', u) with memory M by a segment to (t, v), the extension is admitted iff
``validity(mode, M, t', u, t, v)`` holds.  Memory travels with the optimal
path into each cell, so constrained solves remain quadratic in n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ConfigError

MODES = ("none", "isotonic", "unimodal", "minangle")

# memory conventions
UNIMODAL_FREE = 1.0  # no strictly decreasing segment seen yet
UNIMODAL_LOCKED = 0.0
NO_INCOMING = math.inf  # cell at t = 0: nothing inferred yet


@dataclass(frozen=True)
class ConstraintSpec:
    """Constraint mode selector; ``min_angle_degrees`` applies to minangle only."""

    mode: str = "none"
    min_angle_degrees: float = 130.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown constraint mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "minangle" and not 0.0 < self.min_angle_degrees < 180.0:
            raise ConfigError("min angle threshold must lie strictly between 0 and 180 degrees")


def interior_angle(slope_a: float, slope_b: float) -> float:
    """Interior angle, in degrees, between two consecutive segments.

    180 means the segments are aligned; small values mean a sharp kink.
    """
    return 180.0 - abs(math.degrees(math.atan(slope_a)) - math.degrees(math.atan(slope_b)))


def validity(spec: ConstraintSpec, memory: float, tprime: int, u: float, t: int, v: float) -> bool:
    """Is extending a fit that reached (t', u) with the given memory by a
    segment to (t, v) admissible?

    For unimodal, memory is 1.0 while no strictly decreasing segment has been
    used and 0.0 afterwards.  For minangle, memory is the slope of the segment
    that arrived at (t', u), or NO_INCOMING at t' = 0 (first segment is free).
    """
    if spec.mode == "none":
        return True
    if spec.mode == "isotonic":
        return u <= v
    if spec.mode == "unimodal":
        return memory == UNIMODAL_FREE or u >= v
    # minangle
    if tprime == 0 or memory == NO_INCOMING:
        return True
    slope = (v - u) / (t - tprime)
    return interior_angle(memory, slope) >= spec.min_angle_degrees


def memory_update(spec: ConstraintSpec, memory: float, tprime: int, u: float, t: int, v: float) -> float:
    """Memory carried forward after appending the segment (t', u) -> (t, v)."""
    if spec.mode == "unimodal":
        if memory == UNIMODAL_LOCKED or u > v:
            return UNIMODAL_LOCKED
        return UNIMODAL_FREE
    if spec.mode == "minangle":
        return (v - u) / (t - tprime)
    return 0.0


def slope_window(incoming_slope: float, threshold_degrees: float) -> tuple[float, float]:
    """Closed interval of follow-up slopes compatible with an incoming slope.

    The interior-angle test ``interior_angle(s1, s2) >= threshold`` is
    equivalent to atan(s2) lying within +-(180 - threshold) degrees of
    atan(s1); mapping the angular window back through tan gives slope bounds
    usable with two multiplications per candidate.
    """
    half = 180.0 - threshold_degrees
    a = math.degrees(math.atan(incoming_slope))
    lo_angle = a - half
    hi_angle = a + half
    lo = -math.inf if lo_angle <= -90.0 else math.tan(math.radians(lo_angle))
    hi = math.inf if hi_angle >= 90.0 else math.tan(math.radians(hi_angle))
    return lo, hi
