import csv
import math
import os

import numpy as np
import pytest

from coagfrag.equilibrium import find_equilibrium
from coagfrag.evolution import EvolutionConfig, evolve
from coagfrag.experiments import (DERIVED, THEORY, ExperimentOutcome, abscissa_sweep,
                                  closed_form_control, equilibrium_stability_experiment,
                                  flow_stability_experiment, global_convergence_experiment,
                                  initial_data_stability_experiment, loglog_slope,
                                  spectral_perturbation_experiment, uniqueness_experiment,
                                  write_outcome)
from coagfrag.grid import GridFunction, build_grid
from coagfrag.initial import initial_data
from coagfrag.kernels import builtin_kernel
from coagfrag.operators import assemble

EPS = (0.025, 0.05, 0.1, 0.2)


@pytest.fixture(scope="module")
def g256():
    return build_grid(256, 25.0)


def zero_mass_bump(grid, center, size):
    """A smooth perturbation with zero discrete mass and L1 norm about ``size``."""
    x = grid.nodes
    v = np.exp(-((x - center) / 0.5) ** 2) * (x - center)
    v -= (grid.mass_weights @ v) / (grid.mass_weights @ np.exp(-x)) * np.exp(-x)
    v *= size / np.sum(np.abs(v) * grid.weights)
    return GridFunction(grid, v)


def test_loglog_slope():
    e = np.array([0.1, 0.2, 0.4])
    assert loglog_slope(e, 3 * e ** 1.5) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        loglog_slope([0.0, 0.1], [1.0, 2.0])


# -- flow stability ---------------------------------------------------------------------------

def test_flow_stability(g256):
    f0 = find_equilibrium(assemble(g256, builtin_kernel("constant", 0.0)), 1.0).state
    out = flow_stability_experiment(g256, EPS, f0, t_probe=2.0, dt=2e-3)
    assert out.passed
    assert 0.9 <= out.measured["slope"] <= 1.1
    assert all(tag in (THEORY, DERIVED) for _, tag in out.thresholds.values())
    assert set(out.units) == set(out.measured)
    longer = flow_stability_experiment(g256, EPS, f0, t_probe=4.0, dt=2e-3)
    for p_short, p_long in zip(out.points, longer.points):
        assert p_long["ratio"] > p_short["ratio"]


def test_flow_control_is_exact(g256):
    f0 = initial_data(g256, "exp(2)", 1.0)
    a = assemble(g256, builtin_kernel("smooth-product", 0.0))
    cfg = EvolutionConfig(dt=0.01, t_end=1.0)
    np.testing.assert_array_equal(evolve(a, f0, cfg).final.values, evolve(a, f0, cfg).final.values)


def test_flow_stability_rejects_eps(g256):
    f0 = initial_data(g256, "exp(1)", 1.0)
    with pytest.raises(ValueError):
        flow_stability_experiment(g256, [0.0, 0.1], f0)
    with pytest.raises(ValueError):
        flow_stability_experiment(g256, [0.5], f0)


# -- initial-data stability ------------------------------------------------------------------

def test_initial_data_identical(g256):
    f0 = initial_data(g256, "exp(2)", 1.0)
    out = initial_data_stability_experiment(g256, f0, f0, 0.1, t_probe=1.0, dt=5e-3, samples=5)
    assert out.passed and out.measured["max_distance"] == 0.0


def test_initial_data_stability(g256):
    f0 = initial_data(g256, "exp(2)", 1.0)
    g0 = f0 + zero_mass_bump(g256, 3.0, 1e-3)
    assert np.all(g0.values >= 0)
    out = initial_data_stability_experiment(g256, f0, g0, 0.1, t_probe=2.0, dt=5e-3,
                                            long_time=10.0)
    assert out.passed
    assert math.isfinite(out.measured["B"])
    assert out.measured["late_ratio"] < 1.0
    ratios = np.array([p["ratio"] for p in out.points])
    ts = np.array([p["t"] for p in out.points])
    assert np.all(ratios <= np.exp(out.measured["B"] * ts) * (1 + 1e-12))


def test_initial_data_mass_mismatch(g256):
    f0 = initial_data(g256, "exp(2)", 1.0)
    with pytest.raises(ValueError):
        initial_data_stability_experiment(g256, f0, f0 * 1.1, 0.1)


# -- global convergence ------------------------------------------------------------------------

def test_global_convergence_constant(g256):
    family = {"exp(2)": initial_data(g256, "exp(2)", 1.0),
              "bump(3,1)": initial_data(g256, "bump(3, 1)", 1.0)}
    out = global_convergence_experiment(g256, 0.0, 1.0, family, c_meas=0.0, kernel="constant",
                                        t_end=10.0, dt=5e-3, alpha=0)
    assert out.passed
    # datum with M0 = 1/2: rate at least min(M0, sqrt(rho)) up to fitting slack
    rate = next(p["rate"] for p in out.points if p["datum"] == "exp(2)")
    assert rate >= 0.45


def test_local_convergence_matches_spectrum(g256):
    eps = 0.1
    a = assemble(g256, builtin_kernel("smooth-product", eps))
    Q = find_equilibrium(a, 1.0).state
    f0 = Q + zero_mass_bump(g256, 2.0, 1e-3)
    rep = abscissa_sweep(g256, [eps])[eps]
    out = global_convergence_experiment(g256, eps, 1.0, {"near": f0}, c_meas=0.2, t_end=8.0,
                                        dt=5e-3)
    assert out.passed
    assert out.points[0]["rate"] == pytest.approx(-rep.abscissa, rel=0.15)


def test_global_convergence_requires_mass(g256):
    with pytest.raises(ValueError):
        global_convergence_experiment(g256, 0.0, 1.0, {"bad": initial_data(g256, "exp(1)", 2.0)},
                                      c_meas=0.0, kernel="constant", t_end=1.0, dt=0.01)


# -- equilibria ---------------------------------------------------------------------------------

def test_equilibrium_stability(g256):
    out = equilibrium_stability_experiment(g256, EPS)
    assert out.passed
    ratios = [p["ratio"] for p in out.points]
    assert max(ratios) / min(ratios) < 1.5


def test_uniqueness_experiment(g256):
    pairs = {"exp/bump": (initial_data(g256, "equilibrium", 1.0),
                          initial_data(g256, "bump(3, 1)", 1.0)),
             "exp/exp": (initial_data(g256, "exp(0.5)", 1.0), initial_data(g256, "exp(3)", 1.0))}
    out = uniqueness_experiment(g256, 0.1, pairs)
    assert out.passed and len(out.points) == 2
    assert out.thresholds["agreement"] == (1e-6, DERIVED)


def test_closed_form_control(g256):
    # the sampled closed form and the computed state differ by the grid error only
    d = closed_form_control(g256)
    d_fine = closed_form_control(build_grid(512, 25.0))
    assert d_fine < d < 1e-2
    assert d / d_fine > 1.8


# -- spectra ------------------------------------------------------------------------------------

@pytest.mark.parametrize("kernel", ["smooth-product", "resonant-singular"])
def test_spectral_perturbation(g256, kernel):
    out = spectral_perturbation_experiment(g256, EPS, kernel=kernel)
    assert out.passed
    c = out.measured["c_meas"]
    for p in out.points:
        assert p["shift"] <= c * p["epsilon"]
    assert out.measured["abscissa_max_eps"] <= -1.0


# -- determinism and output ---------------------------------------------------------------------

def test_determinism(g256):
    pairs = {"p": (initial_data(g256, "equilibrium", 1.0), initial_data(g256, "exp(2)", 1.0))}
    a = uniqueness_experiment(g256, 0.05, pairs)
    b = uniqueness_experiment(g256, 0.05, pairs)
    assert a.measured == b.measured and a.points == b.points


def test_write_outcome(tmp_path):
    out = ExperimentOutcome("demo", {"k": 1}, {"x": 0.1}, {"x": "units"}, {"x": (1.0, DERIVED)},
                            True, points=[{"epsilon": 0.1, "d": 1 / 3}, {"epsilon": 0.2, "d": 0.5}])
    path = write_outcome(out, tmp_path, stamp="20260101T000000")
    assert os.path.basename(path) == "demo_20260101T000000.csv"
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["experiment", "d", "epsilon", "passed"]
    assert float(rows[1][1]) == 1 / 3 and rows[2][-1] == "1"
    summary = open(path[:-4] + "_summary.txt").read()
    assert "[demo] PASS" in summary and "[derived]" in summary


def test_write_outcome_default_stamp(tmp_path):
    out = ExperimentOutcome("solo", {}, {"x": 2.0}, {"x": "-"}, {}, False)
    path = write_outcome(out, tmp_path / "nested")
    assert os.path.basename(path).startswith("solo_") and os.path.exists(path)
