"""Stationary states: the closed-form constant-kernel state and a Newton solver."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .evolution import EvolutionConfig, dt_cfl, evolve
from .grid import GridFunction, SizeGrid, check_same_grid, moment, sample, weighted_l1_norm
from .kernels import builtin_kernel
from .operators import OperatorAssembly, _rhs, assemble, coagulation_jacobian

logger = logging.getLogger(__name__)

MASS_RTOL = 1e-8
MAX_HALVINGS = 30


class EquilibriumError(RuntimeError):
    pass


@dataclass
class EquilibriumResult:
    state: GridFunction
    rho: float
    residual_l1: float
    iterations: int
    method: str
    history: list = field(default_factory=list)
    clipped: bool = False


def residual_l1(a: OperatorAssembly, f: GridFunction) -> float:
    """``sum |C(f, f) + F(f)| w``."""
    check_same_grid(a.grid, f)
    return float(np.sum(np.abs(_rhs(a, f.values)) * a.grid.weights))


def closed_form_equilibrium(grid: SizeGrid, rho: float) -> EquilibriumResult:
    """Sample ``exp(-x / sqrt(rho))``; the residual uses constant kernels."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    s = math.sqrt(rho)
    q = sample(grid, lambda x: np.exp(-x / s))
    res = math.nan
    if grid.is_uniform:
        res = residual_l1(assemble(grid, builtin_kernel("constant", 0.0)), q)
    return EquilibriumResult(q, float(rho), res, 0, "closed-form")


def _newton(a: OperatorAssembly, f: np.ndarray, rho: float, tol: float, max_iter: int):
    w = a.grid.weights
    mw = a.grid.mass_weights
    n = a.n
    border = np.zeros((n + 1, n + 1))
    border[:n, n] = mw
    border[n, :n] = mw

    def merit(v):
        r = _rhs(a, v)
        return float(np.sum(np.abs(r) * w)) + abs(float(mw @ v) - rho), r

    phi, r = merit(f)
    history = [phi]
    for it in range(1, max_iter + 1):
        if phi <= tol and abs(mw @ f - rho) <= MASS_RTOL * rho:
            return f, it - 1, history, True
        border[:n, :n] = coagulation_jacobian(a, f) + a.frag_matrix
        rhs_vec = np.concatenate([-r, [rho - mw @ f]])
        try:
            step = scipy.linalg.solve(border, rhs_vec, check_finite=False)[:n]
        except (np.linalg.LinAlgError, ValueError):
            return f, it, history, False
        floor = -1e-12 * max(float(np.max(np.abs(f))), 1e-300)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = f + t * step
            if np.all(np.isfinite(trial)) and trial.min() >= floor:
                phi_t, r_t = merit(trial)
                if phi_t < phi or phi_t <= tol:
                    break
            t *= 0.5
        else:
            return f, it, history, False
        f, phi, r = trial, phi_t, r_t
        history.append(phi)
    ok = phi <= tol and abs(mw @ f - rho) <= MASS_RTOL * rho
    return f, max_iter, history, ok


def find_equilibrium(a: OperatorAssembly, rho: float, tol: float = 1e-10,
                     seed: Optional[GridFunction] = None, max_iter: int = 40) -> EquilibriumResult:
    """Mass-constrained damped Newton for ``C(f, f) + F(f) = 0``.

    The Jacobian ``2 C(f, .) + F(.)`` is bordered with the mass functional,
    so the discrete mass is pinned to ``rho`` while the residual goes to
    zero.  Steps are halved until the merit ``|R|_1 + |M_1 - rho|`` drops.
    If Newton stalls, the seed is first relaxed by time-marching over
    ``5 / sqrt(rho)`` and Newton is restarted.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    if seed is None:
        seed = closed_form_equilibrium(a.grid, rho).state
    check_same_grid(a.grid, seed)
    f0 = np.array(seed.values, dtype=float)
    if np.any(f0 < 0):
        raise ValueError("seed must be nonnegative")
    f, iters, hist, ok = _newton(a, f0, rho, tol, max_iter)
    method = "newton"
    if not ok:
        logger.info("Newton stalled after %d iterations; time-marching the seed", iters)
        start = GridFunction(a.grid, f0 * (rho / float(a.grid.mass_weights @ f0)))
        dt = min(1e-3, 0.5 * dt_cfl(a, start))
        t_end = 5.0 / math.sqrt(rho)
        march = evolve(a, start, EvolutionConfig(dt=dt, t_end=t_end,
                                                 observable_stride=10**9))
        f, more, hist2, ok = _newton(a, march.final.values, rho, tol, max_iter)
        iters += more
        hist = hist + hist2
        method = "time-march+newton"
    if not ok:
        raise EquilibriumError(
            f"no convergence after {iters} iterations (merit {hist[-1]:.3e})")

    top = float(np.max(np.abs(f)))
    clipped = False
    if f.min() < 0:
        if f.min() < -1e-12 * top:
            raise EquilibriumError(f"equilibrium has negative entry {f.min():.3e}")
        f = np.maximum(f, 0.0)
        clipped = True
        logger.warning("clipped round-off negative entries of the equilibrium")
    state = GridFunction(a.grid, f)
    return EquilibriumResult(state, float(rho), residual_l1(a, state), iters, method,
                             hist, clipped)


def moment_bounds(rho: float, epsilon: float, orders=(2, 3)) -> dict:
    """Bounds on ``M_0`` and ``M_m`` of any stationary state of mass ``rho``."""
    base = 2.0 * rho + 0.25 * epsilon**2
    out = {0: math.sqrt(base)}
    for m in orders:
        inner = (m + 1) / (m - 1) * (2 + epsilon) * rho ** (m / (m - 1)) * base ** (1 / (2 * m))
        out[m] = inner ** (m * (m - 1) / (2 * m - 1))
    return out


@dataclass
class MomentAudit:
    passed: bool
    moments: dict
    bounds: dict

    def __bool__(self):
        return self.passed


def equilibrium_moment_audit(res: EquilibriumResult, epsilon: float,
                             orders=(2, 3)) -> MomentAudit:
    """Compare ``M_0`` and ``M_m`` of ``res.state`` against the stationary bounds."""
    bounds = moment_bounds(res.rho, epsilon, orders)
    moments = {m: moment(res.state, m) for m in bounds}
    passed = all(moments[m] <= bounds[m] for m in bounds)
    return MomentAudit(passed, moments, bounds)


def uniqueness_distance(a: OperatorAssembly, rho: float, seeds, tol: float = 1e-10) -> float:
    """Solve from two seeds (rescaled to mass ``rho``) and return their ``L^1_1`` distance."""
    s1, s2 = seeds
    sols = []
    for s in (s1, s2):
        m1 = moment(s, 1)
        if m1 <= 0:
            raise ValueError("seed must have positive mass")
        sols.append(find_equilibrium(a, rho, tol, seed=s * (rho / m1)).state)
    return weighted_l1_norm(sols[0] - sols[1], 1)
