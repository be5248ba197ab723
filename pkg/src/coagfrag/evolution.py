"""Fixed-step time integration of the coagulation-fragmentation equation."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diagnostics import entropy
from .grid import GridFunction, check_same_grid
from .operators import CONSERVATIVE, OperatorAssembly, _rhs, mass_leak

logger = logging.getLogger(__name__)

METHODS = ("rk4", "euler")
NONNEGATIVITY_MODES = ("reject", "clip-and-report")
TRAJECTORY_HEADER = ("time", "M0", "M1", "M2", "dist_L1", "dist_L1w1", "dist_L1w2",
                     "entropy", "mass_defect")


class EvolutionError(RuntimeError):
    """Raised when a run produces non-finite or (in reject mode) negative values."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    method: str = "rk4"
    observable_stride: int = 1
    nonnegativity_mode: str = "reject"
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if not self.dt < self.t_end:
            raise ValueError("dt must be smaller than t_end")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if int(self.observable_stride) != self.observable_stride or self.observable_stride < 1:
            raise ValueError("observable_stride must be a positive integer")
        if self.nonnegativity_mode not in NONNEGATIVITY_MODES:
            raise ValueError(f"unknown nonnegativity mode {self.nonnegativity_mode!r}")
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))


@dataclass
class Trajectory:
    times: np.ndarray
    observables: dict
    final: GridFunction
    snapshots: dict = field(default_factory=dict)
    clipped_steps: int = 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.observables[name]

    def rows(self):
        cols = [self.times] + [self.observables[c] for c in TRAJECTORY_HEADER[1:]]
        return zip(*cols)

    def to_csv(self, path) -> None:
        """Write the fixed trajectory columns with round-trip float formatting."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_HEADER)
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


def rhs(a: OperatorAssembly, f: GridFunction) -> GridFunction:
    """Right-hand side ``C_K(f, f) + F_F(f)``."""
    check_same_grid(a.grid, f)
    return GridFunction(a.grid, _rhs(a, f.values))


def dt_cfl(a: OperatorAssembly, f: GridFunction) -> float:
    """Step bound from the stiffest loss rate."""
    m0 = float(np.sum(f.values * a.grid.weights))
    return 1.0 / (2.0 * (2.0 + a.spec.epsilon) * max(m0, float(a.frag_total.max())))


def _observe(obs, grid, f, refs, alphas, ent_ref, orders, defect):
    w, x = grid.weights, grid.nodes
    for p in orders:
        obs[f"M{p:g}"].append(float(np.sum(x**p * f * w)))
    for k, r in enumerate(refs):
        d = np.abs(f - r.values) * w
        tag = "" if k == 0 else f"_ref{k}"
        for alpha, name in alphas:
            obs[name + tag].append(float(np.sum((1.0 + x) ** alpha * d)))
    if ent_ref is not None and np.all(f >= 0):
        obs["entropy"].append(entropy(GridFunction(grid, f), ent_ref))
    else:
        obs["entropy"].append(math.nan)
    obs["mass_defect"].append(defect)


def evolve(a: OperatorAssembly, f0: GridFunction, cfg: EvolutionConfig,
           refs: Sequence[GridFunction] = (), entropy_ref: Optional[GridFunction] = None,
           moment_orders: Sequence[float] = (0, 1, 2)) -> Trajectory:
    """Integrate from ``f0`` to ``cfg.t_end`` and record observables.

    Distances ``dist_L1``, ``dist_L1w1``, ``dist_L1w2`` refer to ``refs[0]``
    (NaN without references); further references get a ``_ref<k>`` suffix.
    The entropy is taken relative to ``entropy_ref`` (default ``refs[0]``
    when strictly positive).  ``mass_defect`` is the cumulative mass removed
    by open truncation minus the mass added by clipping.
    """
    grid = check_same_grid(a.grid, f0, *refs)
    f = np.array(f0.values, dtype=float)
    if np.any(f < 0):
        raise ValueError("initial datum must be nonnegative")
    refs = list(refs)
    if entropy_ref is None and refs and np.all(refs[0].values > 0):
        entropy_ref = refs[0]
    orders = tuple(sorted(set(moment_orders) | {0, 1, 2}))
    alphas = ((0, "dist_L1"), (1, "dist_L1w1"), (2, "dist_L1w2"))
    obs = {f"M{p:g}": [] for p in orders}
    for k in range(len(refs)):
        tag = "" if k == 0 else f"_ref{k}"
        for _, name in alphas:
            obs[name + tag] = []
    if not refs:
        for _, name in alphas:
            obs[name] = []
    obs["entropy"] = []
    obs["mass_defect"] = []

    def record(values, defect):
        _observe(obs, grid, values, refs, alphas, entropy_ref, orders, defect)
        if not refs:
            for _, name in alphas:
                obs[name].append(math.nan)

    open_mode = a.truncation != CONSERVATIVE
    mw = grid.mass_weights
    n_steps = max(1, math.ceil(cfg.t_end / cfg.dt - 1e-9))
    pending_snaps = sorted(cfg.snapshot_times)
    snapshots = {}
    times = [0.0]
    defect = 0.0
    clipped = 0
    record(f, defect)
    t = 0.0
    for step in range(1, n_steps + 1):
        dt = min(cfg.dt, cfg.t_end - t)
        if cfg.method == "rk4":
            k1 = _rhs(a, f)
            f2 = f + 0.5 * dt * k1
            k2 = _rhs(a, f2)
            f3 = f + 0.5 * dt * k2
            k3 = _rhs(a, f3)
            f4 = f + dt * k3
            k4 = _rhs(a, f4)
            if open_mode:
                defect += dt / 6.0 * (mass_leak(a, f) + 2 * mass_leak(a, f2)
                                      + 2 * mass_leak(a, f3) + mass_leak(a, f4))
            f = f + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            if open_mode:
                defect += dt * mass_leak(a, f)
            f = f + dt * _rhs(a, f)
        t = step * cfg.dt if step < n_steps else cfg.t_end

        if not np.all(np.isfinite(f)):
            raise EvolutionError("non-finite values (blow-up)", t)
        if np.any(f < 0):
            if cfg.nonnegativity_mode == "reject":
                i = int(np.argmin(f))
                raise EvolutionError(f"negative density {f[i]:.3e} at x={grid.nodes[i]:.4g}", t)
            neg = np.minimum(f, 0.0)
            defect += float(mw @ neg)
            f = np.maximum(f, 0.0)
            clipped += 1

        while pending_snaps and t >= pending_snaps[0] - 1e-12:
            snapshots[pending_snaps.pop(0)] = GridFunction(grid, f)
        if step % cfg.observable_stride == 0 or step == n_steps:
            times.append(t)
            record(f, defect)

    if clipped:
        logger.warning("clipped negative values in %d of %d steps", clipped, n_steps)
    return Trajectory(
        times=np.array(times),
        observables={k: np.array(v) for k, v in obs.items()},
        final=GridFunction(grid, f),
        snapshots=snapshots,
        clipped_steps=clipped,
    )


@dataclass
class MomentBoundCheck:
    passed: bool
    order: float
    sup: float
    bound: float


def check_moment_bound(traj: Trajectory, m: float, mu_m: float,
                       tolerance: float = 1e-6) -> MomentBoundCheck:
    """``sup_t M_m(t) <= max(M_m(0), mu_m) * (1 + tolerance)``."""
    key = f"M{m:g}"
    if key not in traj.observables:
        raise KeyError(f"moment of order {m:g} was not recorded")
    series = traj.observables[key]
    bound = max(float(series[0]), float(mu_m))
    sup = float(series.max())
    return MomentBoundCheck(sup <= bound * (1.0 + tolerance), m, sup, bound)
