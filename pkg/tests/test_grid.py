import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coagfrag.grid import (GEOMETRIC, UNIFORM, GridFunction, build_grid, check_same_grid, moment,
                           sample, weighted_l1_norm, zeros)


def test_uniform_nodes_on_unit_cells():
    g = build_grid(4, 4.0, UNIFORM)
    np.testing.assert_array_equal(g.nodes, [0.5, 1.5, 2.5, 3.5])
    np.testing.assert_array_equal(g.weights, [1, 1, 1, 1])


def test_two_node_grid():
    g = build_grid(2, 1.0)
    np.testing.assert_array_equal(g.nodes, [0.25, 0.75])
    np.testing.assert_array_equal(g.weights, [0.5, 0.5])


def test_weights_partition_domain():
    assert build_grid(64, 20.0).weights.sum() == 20.0


@pytest.mark.parametrize("n,x_max", [(1, 1.0), (0, 1.0), (4, 0.0), (4, -2.0), (2.5, 1.0)])
def test_build_grid_rejects(n, x_max):
    with pytest.raises(ValueError):
        build_grid(n, x_max)


def test_unknown_scheme():
    with pytest.raises(ValueError):
        build_grid(8, 1.0, "chebyshev")


def test_geometric_grid_invariants():
    g = build_grid(100, 30.0, GEOMETRIC)
    assert np.all(np.diff(g.nodes) > 0) and g.nodes[0] > 0 and g.nodes[-1] < 30.0
    assert np.all(g.weights > 0)
    assert math.isclose(g.weights.sum(), 30.0, rel_tol=1e-12)
    assert not g.is_uniform
    with pytest.raises(ValueError):
        g.h


def test_moment_of_exponential():
    g = build_grid(512, 25.0)
    f = sample(g, lambda x: np.exp(-x))
    assert abs(moment(f, 1) - 1.0) < 1e-3


def test_moment_rho_four():
    g = build_grid(512, 50.0)
    f = sample(g, lambda x: np.exp(-x / 2))
    assert abs(moment(f, 0) - 2.0) < 1e-3


def test_moment_of_zero():
    assert moment(zeros(build_grid(16, 3.0)), 2.5) == 0.0


@pytest.mark.parametrize("alpha,exact", [(0, 1.0), (1, 2.0), (2, 5.0)])
def test_weighted_norm_of_exponential(alpha, exact):
    f = sample(build_grid(512, 25.0), lambda x: np.exp(-x))
    assert abs(weighted_l1_norm(f, alpha) - exact) < 1e-3


def test_sample_examples():
    g = build_grid(2, 2.0)
    np.testing.assert_allclose(sample(g, lambda x: np.exp(-x)).values, np.exp([-0.5, -1.5]))
    assert not np.any(sample(g, lambda x: 0.0).values)
    g4 = build_grid(64, 50.0)
    np.testing.assert_array_equal(sample(g4, lambda x: np.exp(-x / math.sqrt(4.0))).values,
                                  np.exp(-g4.nodes / 2))


def test_sample_scalar_only_formula():
    g = build_grid(5, 1.0)
    f = sample(g, lambda x: math.exp(-x))
    np.testing.assert_allclose(f.values, np.exp(-g.nodes))


def test_sample_rejects_non_finite():
    with pytest.raises(ValueError, match="not finite"), np.errstate(divide="ignore"):
        sample(build_grid(4, 1.0), lambda x: 1.0 / (x - 0.375))


def test_grid_function_validation():
    g = build_grid(4, 1.0)
    with pytest.raises(ValueError):
        GridFunction(g, [1.0, 2.0])
    with pytest.raises(ValueError):
        GridFunction(g, [1.0, np.nan, 0.0, 0.0])
    f = GridFunction(g, [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        f.values[0] = 5.0


def test_grid_mismatch():
    f = zeros(build_grid(4, 1.0))
    h = zeros(build_grid(4, 2.0))
    with pytest.raises(ValueError, match="mismatch"):
        f + h
    assert check_same_grid(f, zeros(build_grid(4, 1.0))) == f.grid


def test_moment_refinement_at_least_first_order():
    errs = []
    for n in (64, 128, 256, 512):
        f = sample(build_grid(n, 30.0), lambda x: x * np.exp(-x))
        errs.append(abs(moment(f, 1) - 2.0))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios >= 1.9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=8, max_size=8), st.floats(0, 4))
def test_norm_monotone_in_alpha(vals, alpha):
    f = GridFunction(build_grid(8, 5.0), vals)
    assert weighted_l1_norm(f, 0) <= weighted_l1_norm(f, alpha) * (1 + 1e-12)
    assert moment(f, 1) <= weighted_l1_norm(f, 1) * (1 + 1e-12)
