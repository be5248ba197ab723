"""Size-axis discretization, grid functions, moments and weighted norms.

The half-line of cluster sizes is truncated to ``(0, x_max]`` and split into
``n`` cells.  Densities are stored as node samples (collocation) and
integrated with the cell widths as quadrature weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

UNIFORM = "uniform-midpoint"
GEOMETRIC = "geometric"
SCHEMES = (UNIFORM, GEOMETRIC)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SizeGrid:
    """Nodes and quadrature weights on the truncated size axis."""

    nodes: np.ndarray
    weights: np.ndarray
    x_max: float
    scheme: str = UNIFORM

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        weights = _frozen(self.weights)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown grid scheme {self.scheme!r}")
        if nodes.ndim != 1 or nodes.size < 2 or weights.shape != nodes.shape:
            raise ValueError("grid needs at least two nodes with one weight each")
        if not (np.all(np.diff(nodes) > 0) and nodes[0] > 0 and nodes[-1] < self.x_max):
            raise ValueError("nodes must be strictly increasing inside (0, x_max)")
        if not np.all(weights > 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def is_uniform(self) -> bool:
        return self.scheme == UNIFORM

    @property
    def h(self) -> float:
        """Cell width of a uniform grid."""
        if not self.is_uniform:
            raise ValueError("cell width is only defined on uniform grids")
        return self.x_max / self.n

    @property
    def mass_weights(self) -> np.ndarray:
        """Discrete mass functional: ``M1(f) == mass_weights @ f.values``."""
        return self.nodes * self.weights

    def __eq__(self, other):
        if not isinstance(other, SizeGrid):
            return NotImplemented
        return (
            self is other
            or (
                self.scheme == other.scheme
                and self.x_max == other.x_max
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.weights, other.weights)
            )
        )

    def __hash__(self):
        return hash((self.scheme, self.x_max, self.n))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A density sampled at the nodes of a :class:`SizeGrid`."""

    grid: SizeGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(
                f"expected {self.grid.n} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float) -> "GridFunction":
        return self.with_values(c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return self.with_values(-self.values)

    def __len__(self) -> int:
        return self.values.size


def check_same_grid(*objs) -> SizeGrid:
    """Return the common grid of the given grid functions/grids or raise."""
    grids = [o if isinstance(o, SizeGrid) else o.grid for o in objs]
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise ValueError("grid mismatch between arguments")
    return first


def build_grid(n: int, x_max: float, scheme: str = UNIFORM) -> SizeGrid:
    """Build a truncated size grid.

    ``uniform-midpoint`` places node ``i`` at ``(i + 1/2) * x_max / n`` with
    weight ``x_max / n``.  ``geometric`` uses a first cell ``[0, x_max * 1e-6]``
    followed by geometrically growing cells; nodes are geometric cell centres.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    if not x_max > 0:
        raise ValueError(f"x_max must be positive, got {x_max!r}")
    n = int(n)
    x_max = float(x_max)
    if scheme == UNIFORM:
        h = x_max / n
        nodes = (np.arange(n) + 0.5) * h
        weights = np.full(n, h)
    elif scheme == GEOMETRIC:
        edges = np.concatenate(([0.0], np.geomspace(x_max * 1e-6, x_max, n)))
        edges[-1] = x_max
        nodes = np.empty(n)
        nodes[0] = 0.5 * edges[1]
        nodes[1:] = np.sqrt(edges[1:-1] * edges[2:])
        weights = np.diff(edges)
    else:
        raise ValueError(f"unknown grid scheme {scheme!r}")
    return SizeGrid(nodes, weights, x_max, scheme)


def sample(grid: SizeGrid, formula: Callable) -> GridFunction:
    """Evaluate ``formula`` at every node.

    The formula is called once on the node array; scalar-only callables are
    retried node by node.
    """
    try:
        values = np.asarray(formula(grid.nodes), dtype=float)
        values = np.broadcast_to(values, grid.nodes.shape)
    except (TypeError, ValueError):
        values = np.array([float(formula(x)) for x in grid.nodes])
    if not np.all(np.isfinite(values)):
        bad = grid.nodes[~np.isfinite(values)][0]
        raise ValueError(f"formula is not finite at node x={bad!r}")
    return GridFunction(grid, values)


def zeros(grid: SizeGrid) -> GridFunction:
    return GridFunction(grid, np.zeros(grid.n))


def moment(f: GridFunction, beta: float) -> float:
    """Discrete moment ``sum x_i**beta * f_i * w_i``."""
    g = f.grid
    return float(np.sum(g.nodes ** beta * f.values * g.weights))


def weighted_l1_norm(f: GridFunction, alpha: float) -> float:
    """Discrete ``L^1_alpha`` norm with weight ``(1 + x)**alpha``."""
    g = f.grid
    return float(np.sum((1.0 + g.nodes) ** alpha * np.abs(f.values) * g.weights))


def l1_distance(f: GridFunction, g: GridFunction, alpha: float = 0.0) -> float:
    return weighted_l1_norm(f - g, alpha)
