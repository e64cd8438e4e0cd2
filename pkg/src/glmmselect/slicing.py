"""Univariate slice sampling with stepping out and shrinkage (Neal 2003).

Bounded supports are handled by treating the target as -inf outside
(lower, upper): stepping out terminates there and out-of-range proposals
shrink the interval, which preserves invariance without special cases.
"""

import logging
import math

import numpy as np

from .errors import SamplerError

__all__ = ["slice_update", "slice_update_vec", "SliceStats"]

log = logging.getLogger(__name__)

_MAX_SHRINK = 1000


class SliceStats:
    """Mutable counters shared across updates of one parameter family."""

    __slots__ = ("stepouts", "updates", "fallbacks")

    def __init__(self):
        self.stepouts = 0
        self.updates = 0
        self.fallbacks = 0


def slice_update(
    target_logdensity,
    x0: float,
    width: float,
    rng: np.random.Generator,
    lower: float = -math.inf,
    upper: float = math.inf,
    max_stepouts: int = 50,
    stats: SliceStats | None = None,
) -> float:
    """One slice-sampling transition for a scalar coordinate.

    Returns a new value inside (lower, upper); the target distribution is
    invariant under the update.  If the step-out cap is exceeded the interval
    stops growing and the shrinkage phase proceeds from there (logged).
    """
    if not lower < x0 < upper:
        raise SamplerError(f"initial point {x0} outside ({lower}, {upper})")

    def f(x):
        if x <= lower or x >= upper:
            return -math.inf
        return float(target_logdensity(x))

    f0 = f(x0)
    if not math.isfinite(f0):
        raise SamplerError("target log-density is not finite at the current point")

    level = f0 + math.log(rng.random())
    u = rng.random()
    left = x0 - u * width
    right = left + width

    n_out = 0
    while f(left) > level:
        left -= width
        n_out += 1
        if n_out >= max_stepouts:
            if stats is not None:
                stats.fallbacks += 1
            log.debug("slice step-out cap hit (left); shrink-only fallback")
            break
    n_out_r = 0
    while f(right) > level:
        right += width
        n_out_r += 1
        if n_out_r >= max_stepouts:
            if stats is not None:
                stats.fallbacks += 1
            log.debug("slice step-out cap hit (right); shrink-only fallback")
            break
    if stats is not None:
        stats.stepouts += n_out + n_out_r
        stats.updates += 1

    for _ in range(_MAX_SHRINK):
        x1 = left + rng.random() * (right - left)
        if f(x1) > level:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
    raise SamplerError("slice shrinkage failed to find an acceptable point")


def slice_update_vec(
    target_logdensity,
    x0: np.ndarray,
    width,
    rng: np.random.Generator,
    lower: float = -math.inf,
    upper: float = math.inf,
    max_stepouts: int = 50,
    stats: SliceStats | None = None,
) -> np.ndarray:
    """Slice-update several independent coordinates in lockstep.

    ``target_logdensity`` maps an (n,) vector to (n,) per-lane log densities;
    lane i's density may depend only on x[i].  All lanes consume randomness
    from the shared generator in a fixed order, so results are reproducible.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    if n == 0:
        return x0.copy()
    width = np.broadcast_to(np.asarray(width, dtype=float), (n,)).copy()

    def f(x):
        out = np.asarray(target_logdensity(x), dtype=float)
        return np.where((x <= lower) | (x >= upper), -np.inf, out)

    f0 = f(x0)
    if not np.all(np.isfinite(f0)):
        raise SamplerError("vectorized slice target not finite at current point")

    level = f0 + np.log(rng.random(n))
    u = rng.random(n)
    left = x0 - u * width
    right = left + width

    total_out = 0
    for side in ("left", "right"):
        edge = left if side == "left" else right
        active = f(edge) > level
        steps = 0
        while np.any(active):
            if steps >= max_stepouts:
                if stats is not None:
                    stats.fallbacks += int(active.sum())
                log.debug("vector slice step-out cap hit on %d lanes", int(active.sum()))
                break
            if side == "left":
                edge = np.where(active, edge - width, edge)
            else:
                edge = np.where(active, edge + width, edge)
            total_out += int(active.sum())
            active = active & (f(edge) > level)
            steps += 1
        if side == "left":
            left = edge
        else:
            right = edge
    if stats is not None:
        stats.stepouts += total_out
        stats.updates += n

    x1 = x0.copy()
    pending = np.ones(n, dtype=bool)
    for _ in range(_MAX_SHRINK):
        prop = left + rng.random(n) * (right - left)
        fx = f(np.where(pending, prop, x0))
        accept = pending & (fx > level)
        x1[accept] = prop[accept]
        pending &= ~accept
        if not np.any(pending):
            return x1
        shrink_left = pending & (prop < x0)
        shrink_right = pending & ~shrink_left
        left = np.where(shrink_left, prop, left)
        right = np.where(shrink_right, prop, right)
    raise SamplerError("vectorized slice shrinkage failed to converge")
