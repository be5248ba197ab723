"""Linearization around a stationary state and its spectrum on zero-mass perturbations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .grid import GridFunction, SizeGrid, check_same_grid
from .operators import OperatorAssembly, coagulation_jacobian

SPECTRUM_HEADER = ("epsilon", "rho", "n", "x_max", "abscissa", "propagator_rate", "gap_reference")
MASS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """Dense matrix of ``h -> 2 C(Q, h) + F(h)``."""

    matrix: np.ndarray
    base_state: GridFunction
    grid: SizeGrid
    epsilon: float

    @property
    def rho(self) -> float:
        return float(self.grid.mass_weights @ self.base_state.values)

    def apply(self, h: GridFunction) -> GridFunction:
        check_same_grid(self.grid, h)
        return GridFunction(self.grid, self.matrix @ h.values)

    def mass_action(self) -> np.ndarray:
        """Discrete mass of every column (zero for a mass-neutral operator)."""
        return self.grid.mass_weights @ self.matrix


def assemble_linearized(a: OperatorAssembly, Q: GridFunction) -> LinearizedOperator:
    check_same_grid(a.grid, Q)
    mat = coagulation_jacobian(a, Q.values) + a.frag_matrix
    mat.setflags(write=False)
    return LinearizedOperator(mat, Q, a.grid, a.spec.epsilon)


@dataclass(frozen=True, eq=False)
class RestrictedOperator:
    """``L`` on ``{h : sum x_i h_i w_i = 0}`` in an orthonormal basis ``B``.

    ``matrix = B^T L B``.  The full operator maps every vector into the
    zero-mass subspace, so this is an exact representation there.
    """

    parent: LinearizedOperator
    basis: np.ndarray
    matrix: np.ndarray

    @property
    def grid(self) -> SizeGrid:
        return self.parent.grid

    def project(self, h) -> np.ndarray:
        """Orthogonal projection of ``h`` onto the zero-mass subspace."""
        v = h.values if isinstance(h, GridFunction) else np.asarray(h, float)
        return self.basis @ (self.basis.T @ v)

    def apply(self, h: GridFunction) -> GridFunction:
        check_same_grid(self.grid, h)
        return GridFunction(self.grid, self.basis @ (self.matrix @ (self.basis.T @ h.values)))


def project_zero_mass(L: LinearizedOperator) -> RestrictedOperator:
    mw = L.grid.mass_weights
    if not np.any(mw):
        raise ValueError("degenerate mass functional")
    # full QR of the mass direction; the trailing columns span its complement
    q, _ = np.linalg.qr(mw[:, None], mode="complete")
    basis = np.ascontiguousarray(q[:, 1:])
    basis.setflags(write=False)
    mat = basis.T @ L.matrix @ basis
    return RestrictedOperator(L, basis, mat)


@dataclass
class SpectralReport:
    """``abscissa`` is an eigenvalue real part (negative); ``propagator_rate`` a decay rate (positive)."""

    abscissa: float
    propagator_rate: float
    gap_reference: float
    epsilon: float
    rho: float
    n: int
    x_max: float
    method: str = "dense-eig"
    eigenvalues: Optional[np.ndarray] = None

    def row(self) -> tuple:
        return (self.epsilon, self.rho, self.n, self.x_max, self.abscissa,
                self.propagator_rate, self.gap_reference)


def _l1(grid: SizeGrid, v: np.ndarray) -> float:
    return float(np.sum(np.abs(v) * grid.weights))


def propagator_rate(R: RestrictedOperator, horizon: Optional[float] = None, seed: int = 0,
                    rtol: float = 1e-9, max_sweeps: int = 400) -> float:
    """Asymptotic decay rate of ``|exp(L t) h|_1`` for a random zero-mass ``h``.

    ``exp(L T)`` over ``T = horizon`` (default ``5 / sqrt(rho)``) is applied
    repeatedly with renormalisation; the per-window log decay of the discrete
    ``L^1`` norm settles on the slowest mode.  No eigenvalues are computed.
    """
    rho = R.parent.rho
    T = 5.0 / math.sqrt(rho) if horizon is None else float(horizon)
    prop = scipy.linalg.expm(R.matrix * T)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(R.matrix.shape[0])
    c /= _l1(R.grid, R.basis @ c)
    rate = math.nan
    for _ in range(max_sweeps):
        nxt = prop @ c
        size = _l1(R.grid, R.basis @ nxt)
        if not (size > 0 and math.isfinite(size)):
            raise ArithmeticError("propagator iteration degenerated")
        new = -math.log(size) / T
        c = nxt / size
        if math.isfinite(rate) and abs(new - rate) <= rtol * abs(new):
            return new
        rate = new
    return rate


def spectral_abscissa(R: RestrictedOperator, with_propagator: bool = True,
                      seed: int = 0) -> SpectralReport:
    """Largest real part of the restricted spectrum, with a semigroup cross-check."""
    try:
        ev = scipy.linalg.eigvals(R.matrix, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc
    ev = ev[np.argsort(-ev.real)]
    rate = propagator_rate(R, seed=seed) if with_propagator else math.nan
    g = R.grid
    rho = R.parent.rho
    return SpectralReport(
        abscissa=float(ev[0].real),
        propagator_rate=float(rate),
        gap_reference=2.0 * math.sqrt(rho),
        epsilon=R.parent.epsilon,
        rho=rho,
        n=g.n,
        x_max=g.x_max,
        eigenvalues=ev,
    )


def solve_linearized(R: RestrictedOperator, h: GridFunction) -> GridFunction:
    """Solve ``L g = h`` inside the zero-mass subspace."""
    check_same_grid(R.grid, h)
    mw = R.grid.mass_weights
    mass = float(mw @ h.values)
    scale = max(float(np.sum(np.abs(h.values) * mw)), 1e-300)
    if abs(mass) > MASS_TOL * max(1.0, scale):
        raise ValueError(f"right-hand side carries mass {mass:.3e}; expected zero")
    rhs = R.basis.T @ h.values
    try:
        c = scipy.linalg.solve(R.matrix, rhs)
    except scipy.linalg.LinAlgError as exc:
        raise ArithmeticError("restricted operator is singular") from exc
    return GridFunction(R.grid, R.basis @ c)
