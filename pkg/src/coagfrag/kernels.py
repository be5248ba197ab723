"""Perturbed constant rate kernels ``K = 2 + eps*W`` and ``F = 2 + eps*V``.

Admissible perturbations satisfy ``0 <= W <= 1`` and ``0 <= (x+y) V <= nu_star``
(``nu_star = 1`` for the base class).  Perturbation callables must be
vectorised over numpy arrays.

Two optional structural hints enable O(n) operator paths:

``coag_factors``
    callables ``a_r`` with ``W(x, y) == sum_r a_r(x) * a_r(y)``.
``frag_profile``
    a callable ``v`` with ``V(x, y) == v(x + y)``.

Assembly checks the hints against the tabulated kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

BUILTIN_KERNELS = ("constant", "smooth-product", "resonant-singular")

_TOL = 1e-12


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


@dataclass(frozen=True)
class KernelSpec:
    epsilon: float
    coag_perturbation: Callable = _zero
    frag_perturbation: Callable = _zero
    nu_star: float = 1.0
    name: str = "custom"
    coag_factors: Optional[tuple] = None
    frag_profile: Optional[Callable] = None

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon!r}")
        if not self.nu_star > 0:
            raise ValueError(f"nu_star must be positive, got {self.nu_star!r}")
        if self.coag_factors is not None:
            object.__setattr__(self, "coag_factors", tuple(self.coag_factors))

    def K(self, x, y):
        """Vectorised coagulation kernel (no argument checks)."""
        return 2.0 + self.epsilon * np.asarray(self.coag_perturbation(x, y), float)

    def F(self, x, y):
        """Vectorised fragmentation kernel (no argument checks)."""
        return 2.0 + self.epsilon * np.asarray(self.frag_perturbation(x, y), float)


def _ones(x):
    return np.ones(np.shape(x))


def _ratio(x):
    return x / (1.0 + x)


def builtin_kernel(name: str, epsilon: float, nu_star: float = 1.0) -> KernelSpec:
    """Return one of the shipped kernel families.

    constant
        ``W = V = 0``.
    smooth-product
        ``W = xy / ((1+x)(1+y))``, ``V = 1 / (1+x+y)``.
    resonant-singular
        ``W = 1``, ``V = 1 / (x+y)``; saturates both admissibility bounds.
    """
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon!r}")
    if name == "constant":
        return KernelSpec(epsilon, _zero, _zero, nu_star, name,
                          coag_factors=(), frag_profile=lambda s: np.zeros(np.shape(s)))
    if name == "smooth-product":
        return KernelSpec(
            epsilon,
            lambda x, y: _ratio(x) * _ratio(y),
            lambda x, y: 1.0 / (1.0 + x + y),
            nu_star,
            name,
            coag_factors=(_ratio,),
            frag_profile=lambda s: 1.0 / (1.0 + s),
        )
    if name == "resonant-singular":
        return KernelSpec(
            epsilon,
            lambda x, y: np.ones(np.broadcast(x, y).shape),
            lambda x, y: 1.0 / (x + y),
            nu_star,
            name,
            coag_factors=(_ones,),
            frag_profile=lambda s: 1.0 / s,
        )
    raise ValueError(f"unknown kernel {name!r}; choose from {BUILTIN_KERNELS}")


def _check_positive(x, y):
    if np.any(np.asarray(x) <= 0) or np.any(np.asarray(y) <= 0):
        raise ValueError("kernel arguments must be positive")


def eval_coag(spec: KernelSpec, x, y):
    _check_positive(x, y)
    out = spec.K(x, y)
    return float(out) if np.ndim(out) == 0 else out


def eval_frag(spec: KernelSpec, x, y):
    _check_positive(x, y)
    out = spec.F(x, y)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ValidationReport:
    passed: bool
    worst_violation: float
    worst_pair: tuple
    violations: np.ndarray = field(repr=False)

    def __bool__(self):
        return self.passed


def default_sample_pairs(m: int = 100, lo: float = 1e-3, hi: float = 1e3) -> np.ndarray:
    """Log-spaced ``m x m`` pair set covering ``[lo, hi]^2`` as an ``(m*m, 2)`` array."""
    s = np.geomspace(lo, hi, m)
    X, Y = np.meshgrid(s, s, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def validate(spec: KernelSpec, sample_pairs: Optional[Sequence] = None) -> ValidationReport:
    """Check symmetry and the admissibility bounds on sampled pairs.

    The per-pair violation is the largest amount by which any of the
    conditions fails (0 when all hold).
    """
    pairs = default_sample_pairs() if sample_pairs is None else np.asarray(sample_pairs, float)
    pairs = np.atleast_2d(pairs)
    if pairs.size == 0:
        raise ValueError("validation needs at least one sample pair")
    x, y = pairs[:, 0], pairs[:, 1]
    _check_positive(x, y)

    W = np.broadcast_to(np.asarray(spec.coag_perturbation(x, y), float), x.shape)
    Wt = np.broadcast_to(np.asarray(spec.coag_perturbation(y, x), float), x.shape)
    V = np.broadcast_to(np.asarray(spec.frag_perturbation(x, y), float), x.shape)
    Vt = np.broadcast_to(np.asarray(spec.frag_perturbation(y, x), float), x.shape)
    sV = (x + y) * V

    parts = np.stack([
        np.abs(W - Wt),
        np.abs(V - Vt) * (x + y),
        -W,
        W - 1.0,
        -sV,
        sV - spec.nu_star,
    ])
    violations = np.max(np.maximum(parts, 0.0), axis=0)
    violations[~np.isfinite(violations)] = np.inf
    worst = int(np.argmax(violations))
    return ValidationReport(
        passed=bool(np.all(violations <= _TOL)),
        worst_violation=float(violations[worst]),
        worst_pair=(float(x[worst]), float(y[worst])),
        violations=violations,
    )
