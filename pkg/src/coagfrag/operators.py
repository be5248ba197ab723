"""Discrete coagulation and fragmentation operators on a uniform midpoint grid.

Nodes sit at ``x_i = (i + 1/2) h``, so the size ``x_i + x_j = (i + j + 1) h``
of a merged pair lies on the cell boundary between nodes ``i + j`` and
``i + j + 1``.  A merger therefore deposits half a cluster on each of the two
neighbouring nodes, which preserves both the cluster count and the mass of
every pair exactly.

Fragmentation acts node by node.  A node of size ``x_k`` breaks up at rate
``(1/2) int_0^{x_k} F(y, x_k - y) dy`` and produces two fragments on average,
spread over nodes ``0 .. k`` in proportion to the kernel, with the half cell
just below ``x_k`` counted at half weight.  The small surplus of mass
in those raw weights is shifted from node ``k`` to node ``k - 1``, so every
breakup conserves mass exactly while all gains stay nonnegative.  The
smallest node cannot split on the grid.  Both operators are second order for
smooth data.

Truncation at ``x_max`` comes in two flavours:

``conservative`` (default)
    mergers whose product would leave the grid are switched off, gain and
    loss alike, so the discrete mass is an exact invariant.
``open``
    losses run over the full grid and products beyond ``x_max`` are dropped;
    the exported mass is reported as a truncation defect.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .grid import GridFunction, SizeGrid, check_same_grid
from .kernels import KernelSpec

CONSERVATIVE = "conservative"
OPEN = "open"
TRUNCATIONS = (CONSERVATIVE, OPEN)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


@dataclass(frozen=True, eq=False)
class OperatorAssembly:
    """Tabulated kernels and precomputed operator pieces for one grid/kernel pair."""

    grid: SizeGrid
    spec: KernelSpec
    coag_table: np.ndarray = field(repr=False)
    frag_table: np.ndarray = field(repr=False)
    frag_total: np.ndarray = field(repr=False)
    truncation: str = CONSERVATIVE
    frag_rate: np.ndarray = field(default=None, repr=False)
    daughters: np.ndarray = field(default=None, repr=False)
    frag_matrix: np.ndarray = field(default=None, repr=False)
    coag_loss_table: np.ndarray = field(default=None, repr=False)
    factors: np.ndarray = field(default=None, repr=False)
    frag_bands: tuple = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def separable(self) -> bool:
        return self.factors is not None

    @property
    def pair_mask(self) -> np.ndarray:
        """Pairs ``(i, j)`` whose merger is active."""
        i = np.arange(self.n)
        if self.truncation == OPEN:
            return np.ones((self.n, self.n), bool)
        return (i[:, None] + i[None, :]) <= self.n - 2


def _frag_total(grid: SizeGrid, spec: KernelSpec) -> np.ndarray:
    x = grid.nodes
    if spec.frag_profile is not None:
        return 2.0 * x + spec.epsilon * x * np.asarray(spec.frag_profile(x), float)
    # Gauss-Legendre on [0, x_i]
    y = 0.5 * x[:, None] * (1.0 + _GL_NODES[None, :])
    vals = spec.F(y, x[:, None] - y)
    return 0.5 * x * (vals @ _GL_WEIGHTS)


def _daughters(grid: SizeGrid, spec: KernelSpec) -> np.ndarray:
    """Row ``k`` holds the expected number of fragments on each node per breakup of node ``k``.

    Cells below the parent are weighted by the kernel at their midpoints and
    the half cell ``[k h, x_k]`` by the kernel at its own midpoint.  Rows are
    scaled to two fragments, and the small mass surplus of the raw weights
    is moved from node ``k`` down to node ``k - 1``, so each row carries
    exactly the parent's mass.  Node 0 cannot split on the grid and its row
    stays empty.
    """
    n, h, x = grid.n, grid.h, grid.nodes
    k = np.arange(n)
    raw = np.zeros((n, n))
    lower = k[None, :] < k[:, None]
    X = np.broadcast_to(x[None, :], (n, n))
    P = np.broadcast_to(x[:, None], (n, n))
    vals = spec.F(np.where(lower, X, 1.0), np.where(lower, P - X, 1.0))
    raw[lower] = h * np.broadcast_to(vals, (n, n))[lower]
    raw[k, k] = 0.5 * h * np.broadcast_to(spec.F(x - 0.25 * h, np.full(n, 0.25 * h)), (n,))
    raw[0] = 0.0
    tot = raw.sum(axis=1)
    m = np.zeros((n, n))
    m[1:] = 2.0 * raw[1:] / tot[1:, None]
    surplus = (m @ x - np.where(k > 0, x, 0.0)) / h
    m[k[1:], k[1:]] -= surplus[1:]
    m[k[1:], k[1:] - 1] += surplus[1:]
    if np.any(m < -1e-12):
        raise ValueError("fragmentation kernel too skewed for the fragment distribution")
    return np.maximum(m, 0.0)


def _frag_matrix(daughters: np.ndarray, rate: np.ndarray) -> np.ndarray:
    mat = daughters.T * rate[None, :]
    mat[np.diag_indices_from(mat)] -= rate
    return mat


def assemble(grid: SizeGrid, spec: KernelSpec, truncation: str = CONSERVATIVE) -> OperatorAssembly:
    """Tabulate the kernels on ``grid`` and precompute the linear fragmentation matrix."""
    if not grid.is_uniform:
        raise ValueError("operator assembly requires a uniform-midpoint grid")
    if truncation not in TRUNCATIONS:
        raise ValueError(f"unknown truncation {truncation!r}")
    x = grid.nodes
    X, Y = np.meshgrid(x, x, indexing="ij")
    coag = np.broadcast_to(spec.K(X, Y), X.shape).astype(float)
    frag = np.broadcast_to(spec.F(X, Y), X.shape).astype(float)
    if not (np.all(np.isfinite(coag)) and np.all(np.isfinite(frag))):
        raise ValueError("kernel tables contain non-finite entries")
    if np.any(coag < 0) or np.any(frag < 0):
        raise ValueError("kernel tables contain negative entries")

    factors = None
    if spec.coag_factors is not None:
        factors = np.array([np.broadcast_to(a(x), x.shape) for a in spec.coag_factors],
                           dtype=float).reshape(-1, x.size)
        rebuilt = 2.0 + spec.epsilon * (factors.T @ factors)
        if not np.allclose(rebuilt, coag, rtol=1e-12, atol=1e-12):
            raise ValueError("coag_factors do not reproduce the coagulation perturbation")
    if spec.frag_profile is not None:
        prof = 2.0 + spec.epsilon * np.asarray(spec.frag_profile(X + Y), float)
        if not np.allclose(prof, frag, rtol=1e-12, atol=1e-12):
            raise ValueError("frag_profile does not reproduce the fragmentation perturbation")

    total = _frag_total(grid, spec)
    rate = 0.5 * total
    rate[0] = 0.0
    daughters = _daughters(grid, spec)
    fmat = _frag_matrix(daughters, rate)

    bands = None
    if spec.frag_profile is not None:
        # rows are flat below k - 1 when F depends on x + y only
        k = np.arange(grid.n)
        bands = (daughters[:, 0].copy(), daughters[k[1:], k[1:] - 1].copy(),
                 daughters[k, k].copy())
        bands[0][:2] = 0.0

    a = OperatorAssembly(grid, spec, coag, frag, total, truncation,
                         frag_rate=rate, daughters=daughters, frag_matrix=fmat,
                         factors=factors, frag_bands=bands)
    object.__setattr__(a, "coag_loss_table", np.where(a.pair_mask, coag, 0.0))
    for arr in (coag, frag, total, rate, daughters, fmat, a.coag_loss_table):
        arr.setflags(write=False)
    return a


# -- array-level kernels ----------------------------------------------------

def _pair_sums(a: OperatorAssembly, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``S_m = sum_{i+j=m} K_ij f_i g_j`` for ``m = 0 .. 2n-2``."""
    if a.separable:
        s = 2.0 * np.convolve(f, g)
        for u in a.factors:
            s += a.spec.epsilon * np.convolve(u * f, u * g)
        return s
    n = a.n
    idx = _antidiagonal_index(n)
    return np.bincount(idx, weights=(a.coag_table * np.outer(f, g)).ravel(),
                       minlength=2 * n - 1)


_ANTIDIAG_CACHE: dict = {}


def _antidiagonal_index(n: int) -> np.ndarray:
    idx = _ANTIDIAG_CACHE.get(n)
    if idx is None:
        i = np.arange(n)
        idx = (i[:, None] + i[None, :]).ravel()
        _ANTIDIAG_CACHE[n] = idx
    return idx


def _partner_sums(a: OperatorAssembly, g: np.ndarray) -> np.ndarray:
    """``sum_j K_mj g_j`` over the active pairs of each row ``m``."""
    if not a.separable:
        return a.coag_loss_table @ g
    n = a.n
    if a.truncation == OPEN:
        out = np.full(n, 2.0 * g.sum())
        for u in a.factors:
            out += a.spec.epsilon * u * np.dot(u, g)
        return out

    def reach(v):
        c = np.cumsum(v)
        r = np.zeros(n)
        r[: n - 1] = c[n - 2 :: -1]
        return r

    out = 2.0 * reach(g)
    for u in a.factors:
        out += a.spec.epsilon * u * reach(u * g)
    return out


def _coag(a: OperatorAssembly, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    n, h = a.n, a.h
    s = _pair_sums(a, f, g)[:n]
    if a.truncation == CONSERVATIVE:
        s = s.copy()
        s[n - 1] = 0.0
    gain = s.copy()
    gain[1:] += s[:-1]
    gain *= 0.25 * h
    return gain - 0.5 * h * (f * _partner_sums(a, g) + g * _partner_sums(a, f))


def _frag(a: OperatorAssembly, f: np.ndarray) -> np.ndarray:
    if a.frag_bands is None:
        return a.frag_matrix @ f
    flat, below, own = a.frag_bands
    b = a.frag_rate * f
    out = (own - 1.0) * b
    out[:-1] += below * b[1:]
    # node i collects the flat share of every parent k >= i + 2
    tail = np.cumsum((flat * b)[::-1])[::-1]
    out[:-2] += tail[2:]
    return out


def _rhs(a: OperatorAssembly, f: np.ndarray) -> np.ndarray:
    return _coag(a, f, f) + _frag(a, f)


# -- public operations --------------------------------------------------------

def apply_coagulation(a: OperatorAssembly, f: GridFunction, g: GridFunction) -> GridFunction:
    """Symmetric bilinear coagulation operator ``C_K(f, g)``."""
    check_same_grid(a.grid, f, g)
    return GridFunction(a.grid, _coag(a, f.values, g.values))


def apply_fragmentation(a: OperatorAssembly, f: GridFunction) -> GridFunction:
    """Linear binary fragmentation operator ``F_F(f)``."""
    check_same_grid(a.grid, f)
    return GridFunction(a.grid, _frag(a, f.values))


def coagulation_jacobian(a: OperatorAssembly, q: np.ndarray) -> np.ndarray:
    """Matrix of ``h -> 2 C_K(q, h)``, built entry by entry."""
    n, hh = a.n, a.h
    q = np.asarray(q, float)
    m, j = np.tril_indices(n)
    d = np.zeros((n, n))
    d[m, j] = a.coag_table[m - j, j] * q[m - j]
    if a.truncation == CONSERVATIVE:
        d[n - 1, :] = 0.0
    gain = d.copy()
    gain[1:] += d[:-1]
    gain *= 0.5 * hh
    loss = hh * q[:, None] * a.coag_loss_table
    loss[np.diag_indices(n)] += hh * (a.coag_loss_table @ q)
    return gain - loss


def mass_leak(a: OperatorAssembly, f: np.ndarray) -> float:
    """Mass exported per unit time by truncated mergers (0 when conservative)."""
    if a.truncation == CONSERVATIVE:
        return 0.0
    return float(-(a.grid.mass_weights @ _coag(a, f, f)))


class WeakPairing(NamedTuple):
    coag_part: float
    frag_part: float
    truncation_defect: float


def weak_pairing(a: OperatorAssembly, f: GridFunction, g: GridFunction,
                 phi: Callable) -> WeakPairing:
    """Test the operators against ``phi`` through their pair representation.

    ``coag_part`` equals ``sum_i C(f, g)_i phi(x_i) w_i`` and ``frag_part``
    equals ``sum_i F(f)_i phi(x_i) w_i``.  ``truncation_defect`` is the
    ``phi``-content carried beyond ``x_max`` by dropped merger products
    (``open`` truncation only), so that ``coag_part + truncation_defect`` is
    the untruncated pairing.  ``phi`` must be finite on the virtual nodes up
    to ``2 x_max``.
    """
    check_same_grid(a.grid, f, g)
    n, h = a.n, a.h
    virtual = (np.arange(2 * n + 1) + 0.5) * h
    ph = np.broadcast_to(np.asarray(phi(virtual), float), virtual.shape)
    if not np.all(np.isfinite(ph)):
        raise ValueError("phi must be finite on nodes and pairwise sums")
    inside = ph.copy()
    inside[n:] = 0.0

    fv, gv = f.values, g.values
    i = np.arange(n)
    m = i[:, None] + i[None, :]
    weight = 0.5 * h * h * a.coag_table * np.outer(fv, gv) * a.pair_mask
    merged = 0.5 * (inside[m] + inside[m + 1])
    coag_part = float(np.sum(weight * (merged - ph[i][:, None] - ph[i][None, :])))
    exported = 0.5 * ((ph - inside)[m] + (ph - inside)[m + 1])
    defect = float(np.sum(weight * exported))

    # fragmentation: each breakup of node k replaces phi_k by its fragments' content
    events = h * a.frag_rate * fv
    frag_part = float(events @ (a.daughters @ ph[:n] - ph[:n]))
    return WeakPairing(coag_part, frag_part, defect)
