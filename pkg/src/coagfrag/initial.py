"""Named initial data: ``equilibrium``, ``exp(theta)`` and ``bump(center,width)``."""
from __future__ import annotations

import re

import numpy as np

from .grid import GridFunction, SizeGrid, moment, sample

_CALL = re.compile(r"^\s*([a-z]+)\s*(?:\((.*)\))?\s*$")


def parse_initial(spec: str) -> tuple[str, tuple[float, ...]]:
    """Split ``"bump(3, 0.5)"`` into ``("bump", (3.0, 0.5))``."""
    m = _CALL.match(spec)
    if not m:
        raise ValueError(f"malformed initial data {spec!r}")
    name, args = m.group(1), m.group(2)
    params = tuple(float(p) for p in args.split(",")) if args and args.strip() else ()
    expected = {"equilibrium": 0, "exp": 1, "bump": 2}
    if name not in expected:
        raise ValueError(f"unknown initial data {name!r}")
    if len(params) != expected[name]:
        raise ValueError(f"{name} takes {expected[name]} parameter(s), got {len(params)}")
    if any(p <= 0 for p in params[1:] if name == "bump") or (name == "exp" and params[0] <= 0):
        raise ValueError(f"initial data parameters must be positive: {spec!r}")
    return name, params


def normalize_mass(f: GridFunction, rho: float) -> GridFunction:
    """Rescale ``f`` so that its discrete first moment equals ``rho``."""
    m1 = moment(f, 1)
    if m1 <= 0:
        raise ValueError("cannot normalise a density with nonpositive mass")
    return f * (rho / m1)


def initial_data(grid: SizeGrid, spec: str, rho: float) -> GridFunction:
    """Build named initial data of mass ``rho``.

    ``equilibrium`` samples ``exp(-x / sqrt(rho))`` as is.  ``exp(theta)``
    samples ``(rho / theta**2) exp(-x / theta)`` and ``bump(center, width)`` a
    Gaussian; both are rescaled to discrete mass exactly ``rho``.
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    name, p = parse_initial(spec)
    if name == "equilibrium":
        return sample(grid, lambda x: np.exp(-x / np.sqrt(rho)))
    if name == "exp":
        theta = p[0]
        f = sample(grid, lambda x: rho / theta**2 * np.exp(-x / theta))
    else:
        center, width = p
        f = sample(grid, lambda x: np.exp(-0.5 * ((x - center) / width) ** 2))
    return normalize_mass(f, rho)
