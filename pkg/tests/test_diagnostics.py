import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coagfrag.diagnostics import (FIT_FLOOR, default_window, detailed_balance_residual, entropy,
                                  fit_exponential_rate)
from coagfrag.equilibrium import find_equilibrium
from coagfrag.evolution import EvolutionConfig, evolve
from coagfrag.grid import GridFunction, build_grid, moment, sample
from coagfrag.initial import initial_data
from coagfrag.kernels import KernelSpec, builtin_kernel
from coagfrag.operators import assemble


@pytest.fixture(scope="module")
def g512():
    return build_grid(512, 25.0)


# -- entropy -------------------------------------------------------------------------------

def test_entropy_of_reference_is_minus_number(g512):
    q = sample(g512, lambda x: np.exp(-x))
    assert entropy(q, q) == pytest.approx(-moment(q, 0), rel=1e-14)
    assert entropy(q, q) == pytest.approx(-1.0, rel=1e-3)


def test_entropy_constant_ratio(g512):
    q = sample(g512, lambda x: np.exp(-x))
    assert entropy(q * 2.0, q) == pytest.approx(2 * (math.log(2) - 1) * moment(q, 0), rel=1e-13)
    assert entropy(q * 2.0, q) == pytest.approx(-0.6137, abs=1e-3)


def test_entropy_zero_convention(g512):
    q = sample(g512, lambda x: np.exp(-x))
    f = q.values.copy()
    f[100:] = 0.0
    expected = np.sum((q.values * -1.0)[:100] * g512.weights[:100])
    assert entropy(GridFunction(g512, f), q) == pytest.approx(expected, rel=1e-14)


def test_entropy_errors(g512):
    q = sample(g512, lambda x: np.exp(-x))
    with pytest.raises(ValueError):
        entropy(q, q.with_values(np.where(g512.nodes > 3, 0.0, q.values)))
    with pytest.raises(ValueError):
        entropy(-q, q)
    with pytest.raises(ValueError):
        entropy(q, sample(build_grid(64, 25.0), lambda x: np.exp(-x)))


def test_entropy_decreases_along_constant_kernel_flow(g512):
    a = assemble(g512, builtin_kernel("constant", 0.0))
    q = sample(g512, lambda x: np.exp(-x))
    f0 = initial_data(g512, "exp(2)", 1.0)
    tr = evolve(a, f0, EvolutionConfig(dt=1e-2, t_end=4.0, observable_stride=5), refs=[q])
    assert np.all(np.diff(tr["entropy"]) <= 1e-12)
    assert tr["entropy"][-1] < tr["entropy"][0]


# -- detailed balance -------------------------------------------------------------------------

@pytest.mark.parametrize("rho", [1.0, 2.0, 4.0])
def test_balance_vanishes_for_constant_kernels(rho):
    g = build_grid(256, 25.0 * math.sqrt(rho))
    q = sample(g, lambda x: np.exp(-x / math.sqrt(rho)))
    res = detailed_balance_residual(builtin_kernel("constant", 0.0), q)
    assert float(res) < 1e-12
    assert res.pairs + res.skipped == 256 ** 2 and res.skipped > 0


@pytest.mark.parametrize("c", [0.5, 3.0, 7.0])
def test_balance_vanishes_for_any_equal_constants(g512, c):
    def shift(x, y):
        return np.full(np.broadcast(x, y).shape, c - 2.0)

    spec = KernelSpec(1.0, shift, shift)
    q = sample(g512, lambda x: np.exp(-x))
    assert float(detailed_balance_residual(spec, q)) < 1e-12
    # rescaling Q breaks the balance
    assert float(detailed_balance_residual(spec, q * 2.0)) > 1e-3


def test_balance_positive_for_perturbed_equilibrium():
    g = build_grid(256, 25.0)
    for name in ("smooth-product", "resonant-singular"):
        spec = builtin_kernel(name, 0.1)
        q = find_equilibrium(assemble(g, spec), 1.0).state
        assert float(detailed_balance_residual(spec, q)) > 1e-4


def test_balance_rejects_geometric():
    g = build_grid(64, 25.0, "geometric")
    with pytest.raises(ValueError):
        detailed_balance_residual(builtin_kernel("constant", 0.0), sample(g, lambda x: np.exp(-x)))


# -- rate fits ----------------------------------------------------------------------------------

def test_fit_exact():
    t = np.linspace(0, 5, 100)
    fit = fit_exponential_rate(t, 3 * np.exp(-2 * t), (0.0, 5.0))
    assert fit.rate == pytest.approx(2.0, abs=1e-10)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0) and fit.samples == 100


def test_fit_noisy():
    t = np.linspace(0, 5, 100)
    rng = np.random.default_rng(0)
    y = 3 * np.exp(-2 * t) * (1 + 1e-6 * rng.standard_normal(100))
    assert fit_exponential_rate(t, y, (0.0, 5.0)).rate == pytest.approx(2.0, abs=1e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_fit_scale_invariance(rate, a, c):
    t = np.linspace(0, 3, 60)
    y = a * np.exp(-rate * t)
    f1 = fit_exponential_rate(t, y, (0.0, 3.0))
    f2 = fit_exponential_rate(t, c * y, (0.0, 3.0))
    assert f2.rate == pytest.approx(f1.rate, rel=1e-9, abs=1e-9)
    assert f2.prefactor == pytest.approx(c * f1.prefactor, rel=1e-8)
    assert 0.0 <= f1.r_squared <= 1.0


def test_fit_skips_floor():
    t = np.linspace(0, 40, 400)
    y = np.exp(-2 * t)
    fit = fit_exponential_rate(t, y, (0.0, 40.0))
    assert fit.samples == int(np.sum(y > FIT_FLOOR))
    assert fit.rate == pytest.approx(2.0, rel=1e-9)


def test_default_window():
    t = np.linspace(0, 10, 101)
    y = np.where(t <= 5, np.exp(-t), 0.0)
    lo, hi = default_window(t, y)
    assert (lo, hi) == pytest.approx((1.0, 4.0))
    fit = fit_exponential_rate(t, y)
    assert fit.rate == pytest.approx(1.0, rel=1e-9)


def test_fit_errors():
    t = np.linspace(0, 1, 20)
    with pytest.raises(ValueError, match="at least 10"):
        fit_exponential_rate(t[:5], np.exp(-t[:5]), (0, 1))
    with pytest.raises(ValueError, match="positive"):
        fit_exponential_rate(t, -np.exp(-t), (0, 1))
    with pytest.raises(ValueError):
        fit_exponential_rate(t, np.exp(-t[:10]), (0, 1))


def test_convergence_rate_bounded_below_by_number_density(g512):
    # for constant kernels the distance decays at least like exp(-min(M0(0), sqrt(rho)) t)
    a = assemble(g512, builtin_kernel("constant", 0.0))
    q = find_equilibrium(a, 1.0).state
    f0 = initial_data(g512, "exp(2)", 1.0)
    assert moment(f0, 0) == pytest.approx(0.5, rel=1e-3)
    tr = evolve(a, f0, EvolutionConfig(dt=1e-2, t_end=10.0), refs=[q])
    fit = fit_exponential_rate(tr.times, tr["dist_L1"])
    assert fit.rate >= 0.5 * 0.9
