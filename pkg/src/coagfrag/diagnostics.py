"""Entropy, detailed-balance residual and exponential rate fits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grid import GridFunction, check_same_grid
from .kernels import KernelSpec

FIT_FLOOR = 1e-13


def entropy(f: GridFunction, Q: GridFunction) -> float:
    """Relative entropy ``sum f (ln(f/Q) - 1) w`` with ``0 ln 0 = 0``."""
    g = check_same_grid(f, Q)
    q = Q.values
    if np.any(q <= 0):
        raise ValueError("reference density must be strictly positive")
    fv = f.values
    if np.any(fv < 0):
        raise ValueError("entropy needs a nonnegative density")
    live = fv >= 1e-300
    terms = np.zeros_like(fv)
    terms[live] = fv[live] * (np.log(fv[live] / q[live]) - 1.0)
    return float(np.sum(terms * g.weights))


@dataclass
class BalanceResidual:
    residual: float
    pairs: int
    skipped: int

    def __float__(self):
        return self.residual


def detailed_balance_residual(spec: KernelSpec, Q: GridFunction) -> BalanceResidual:
    """Pair-summed defect of ``K(x,y) Q(x) Q(y) = F(x,y) Q(x+y)``.

    ``x_i + x_j`` falls between nodes ``i+j`` and ``i+j+1``; ``Q`` there is
    the geometric mean of the two node values (log-linear interpolation,
    exact for exponentials).  Pairs whose sum leaves the grid are skipped.
    """
    grid = Q.grid
    if not grid.is_uniform:
        raise ValueError("detailed-balance residual needs a uniform grid")
    n, h, x = grid.n, grid.h, grid.nodes
    q = Q.values
    i = np.arange(n)
    m = i[:, None] + i[None, :]
    ok = m <= n - 2
    X, Y = np.meshgrid(x, x, indexing="ij")
    qs = np.zeros(2 * n)
    qs[: n - 1] = np.sqrt(q[:-1] * q[1:])
    gap = spec.K(X, Y) * np.outer(q, q) - spec.F(X, Y) * qs[m]
    res = float(np.sum(np.abs(gap) * ok) * h * h)
    return BalanceResidual(res, int(ok.sum()), int((~ok).sum()))


@dataclass
class RateFit:
    """Fit of ``y ~ prefactor * exp(-rate * t)``."""

    rate: float
    prefactor: float
    window: tuple
    r_squared: float
    samples: int


def default_window(times, values, floor: float = 1e-10) -> tuple:
    """20%-80% of the span over which ``values`` stay above ``floor``."""
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    above = np.nonzero(y > floor)[0]
    if above.size == 0:
        raise ValueError("no samples above the floor")
    # span ends at the first dip below the floor
    below = np.nonzero(y <= floor)[0]
    last = below[0] - 1 if below.size else above[-1]
    t0, t1 = t[above[0]], t[max(last, above[0])]
    return (t0 + 0.2 * (t1 - t0), t0 + 0.8 * (t1 - t0))


def fit_exponential_rate(times: Sequence[float], values: Sequence[float],
                         window: Optional[tuple] = None) -> RateFit:
    """Least-squares line through ``(t, ln y)`` inside ``window``; rate is minus the slope."""
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    if t.shape != y.shape:
        raise ValueError("times and values differ in length")
    if window is None:
        window = default_window(t, y)
    lo, hi = window
    inside = (t >= lo) & (t <= hi)
    if np.any(y[inside] <= 0):
        raise ValueError("values must be positive inside the fit window")
    use = inside & (y > FIT_FLOOR)
    if use.sum() < 10:
        raise ValueError(f"need at least 10 usable samples in window, got {int(use.sum())}")
    tt, ly = t[use], np.log(y[use])
    slope, intercept = np.polyfit(tt, ly, 1)
    pred = slope * tt + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RateFit(-float(slope), float(np.exp(intercept)), (float(lo), float(hi)), r2, int(use.sum()))
