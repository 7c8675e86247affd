import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdrl.measures import (
    CategoricalDistribution,
    FiniteDistribution,
    ParameterError,
    ReturnDistributionFunction,
    SupportGrid,
    cdf,
    dirac,
    mean,
)
from cdrl.metrics import cramer_l2, stochastically_dominates
from cdrl.projection import (
    hat_function,
    project,
    project_dirac,
    project_rdf,
    project_via_hats,
    projection_matrix,
)

from conftest import finite_dists, grids

G01 = SupportGrid([0.0, 1.0])
G012 = SupportGrid([0.0, 1.0, 2.0])


def half(a, b):
    return FiniteDistribution.from_atoms([a, b], [0.5, 0.5])


@pytest.mark.parametrize(
    "grid, y, expected",
    [
        (G01, 0.25, [0.75, 0.25]),
        (G01, -5.0, [1.0, 0.0]),
        (G01, 1.0, [0.0, 1.0]),
        (G01, 7.0, [0.0, 1.0]),
        (G012, 1.0, [0.0, 1.0, 0.0]),
        (G012, 1.5, [0.0, 0.5, 0.5]),
    ],
)
def test_project_dirac(grid, y, expected):
    np.testing.assert_allclose(project_dirac(grid, y).probs, expected, atol=1e-15)


@pytest.mark.parametrize(
    "grid, d, expected",
    [
        (G01, half(0.25, 0.75), [0.5, 0.5]),
        (G012, dirac(1.0), [0.0, 1.0, 0.0]),
        (G01, dirac(0.5), [0.5, 0.5]),
    ],
)
def test_project(grid, d, expected):
    np.testing.assert_allclose(project(grid, d).probs, expected, atol=1e-15)


def test_project_on_grid_categorical_is_identity():
    d = CategoricalDistribution(G012, [0.2, 0.3, 0.5])
    assert project(G012, d) is d


@pytest.mark.parametrize(
    "i, x, expected",
    [(0, -3.0, 1.0), (1, 0.5, 0.5), (0, 2.0, 0.0), (2, 5.0, 1.0), (1, 1.0, 1.0), (1, 2.5, 0.0)],
)
def test_hat_function(i, x, expected):
    # indices are 0-based: i = 0 is the hat on the lowest grid point
    assert hat_function(G012, i, x) == expected


@pytest.mark.parametrize("i", [-1, 3])
def test_hat_index_out_of_range(i):
    with pytest.raises(ParameterError):
        hat_function(G012, i, 0.0)


def test_hats_partition_unity():
    xs = np.linspace(-2, 4, 121)
    total = sum(hat_function(G012, i, xs) for i in range(3))
    np.testing.assert_allclose(total, 1.0, atol=1e-15)


@pytest.mark.parametrize(
    "grid, d, expected",
    [
        (G01, dirac(0.25), [0.75, 0.25]),
        (G01, dirac(0.5), [0.5, 0.5]),
        (G012, half(0.5, 1.5), [0.25, 0.5, 0.25]),
    ],
)
def test_project_via_hats(grid, d, expected):
    np.testing.assert_allclose(project_via_hats(grid, d).probs, expected, atol=1e-15)


@given(grids(), finite_dists(lo=-6, hi=8))
def test_routes_agree(grid, d):
    np.testing.assert_allclose(project(grid, d).probs, project_via_hats(grid, d).probs, atol=1e-12, rtol=0)


def _cdf_average(d, a, b):
    return float(np.dot(d.masses, b - np.clip(d.locations, a, b)) / (b - a))


@given(grids(), finite_dists(lo=-6, hi=8))
def test_cdf_average_characterisation(grid, d):
    cum = np.cumsum(project(grid, d).probs)
    z = grid.locations
    for i in range(grid.k - 1):
        assert abs(cum[i] - _cdf_average(d, z[i], z[i + 1])) <= 1e-10
    assert abs(cum[-1] - 1.0) <= 1e-10


def test_cdf_average_by_quadrature():
    # independent check of the closed-form average with a fine Riemann sum
    d = FiniteDistribution.from_atoms([0.3, 1.7, 2.2], [0.2, 0.5, 0.3])
    xs = np.linspace(1.0, 2.0, 200_001)
    assert abs(cdf(d, xs)[:-1].mean() - _cdf_average(d, 1.0, 2.0)) <= 1e-5


@given(grids(), st.data())
def test_mean_preserved_inside_grid(grid, data):
    d = data.draw(finite_dists(lo=grid.lo, hi=grid.hi))
    assert abs(mean(project(grid, d)) - mean(d)) <= 1e-10


@given(grids(), st.data())
def test_nonexpansion(grid, data):
    a = data.draw(finite_dists(lo=grid.lo, hi=grid.hi))
    b = data.draw(finite_dists(lo=grid.lo, hi=grid.hi))
    assert cramer_l2(project(grid, a), project(grid, b)) <= cramer_l2(a, b) + 1e-10


@given(grids(), finite_dists(lo=-6, hi=8))
def test_idempotent(grid, d):
    once = project(grid, d)
    keep = once.probs > 0
    twice = project(grid, FiniteDistribution(grid.locations[keep], once.probs[keep]))
    np.testing.assert_array_equal(twice.probs, once.probs)


@given(grids(), finite_dists(lo=-6, hi=8), st.floats(0.0, 3.0))
def test_monotone(grid, d, shift):
    shifted = FiniteDistribution(d.locations + shift, d.masses)
    assert stochastically_dominates(shifted, d)
    assert stochastically_dominates(project(grid, shifted), project(grid, d))


@given(grids(), st.floats(-3, 3), st.floats(0, 0.99))
def test_projection_matrix_rows(grid, r, gamma):
    m = projection_matrix(grid, r, gamma)
    for j, z in enumerate(grid.locations):
        np.testing.assert_allclose(m[j], project_dirac(grid, r + gamma * z).probs, atol=1e-15)


def test_project_rdf():
    eta = ReturnDistributionFunction([[dirac(0.25), dirac(1.5)]])
    out = project_rdf(G012, eta)
    assert out[0, 0] == project(G012, dirac(0.25))
    assert out[0, 1] == project(G012, dirac(1.5))
    on_grid = ReturnDistributionFunction.from_probs(G012, np.array([[[0.2, 0.3, 0.5]]]))
    assert project_rdf(G012, on_grid) == on_grid
