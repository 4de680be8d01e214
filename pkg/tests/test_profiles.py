import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secondgrade import evolution as ev
from secondgrade import profiles as pr
from secondgrade import spectral as sp


def double_factorial(k):
    return math.prod(range(k, 0, -2))


@pytest.fixture(scope="module")
def grid():
    return sp.make_grid(64, 40.0)


def test_gaussian_mass_and_peak(grid):
    G = pr.gaussian(grid)
    assert G.max() == pytest.approx((4 * np.pi) ** -1.5, rel=1e-15)
    assert np.sum(G) * grid.cell_volume == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("power", [0, 1, 2, 3, 4])
def test_radial_moments_of_gaussian(grid, power):
    # || |x|^p G ||^2 = (4 pi)^-3 (2 pi)^(3/2) (2p+1)!!  (G^2 is a unit-variance Gaussian)
    G = pr.gaussian(grid)
    exact = (4 * np.pi) ** -3 * (2 * np.pi) ** 1.5 * double_factorial(2 * power + 1)
    assert pr.radial_moment_norm2(G, grid, power) == pytest.approx(exact, rel=1e-10)


def test_weight_p_is_linear_and_cyclic(grid):
    x1, x2, x3 = grid.coords
    assert np.allclose(pr.weight_p(1, grid), 0.5 * np.array([0 * x1, -x3, x2]))
    assert np.allclose(pr.weight_p(2, grid), 0.5 * np.array([x3, 0 * x1, -x1]))
    assert np.allclose(pr.weight_p(3, grid), 0.5 * np.array([-x2, x1, 0 * x1]))


@pytest.mark.parametrize("i", [0, 4, "1"])
def test_index_errors(grid, i):
    with pytest.raises(ValueError):
        pr.weight_p(i, grid)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_f_by_two_routes(grid, i):
    f = pr.eigenfunction_f(i, grid)
    g = pr.eigenfunction_f_from_curl(i, grid)
    assert np.abs(f - g).max() < 1e-10 * np.abs(f).max()


def test_moments_of_f_are_unit_vectors(grid):
    for i in (1, 2, 3):
        m = pr.first_moments(pr.eigenfunction_f(i, grid), grid)
        assert np.allclose(m.b, np.eye(3)[i - 1], atol=1e-12)
        assert m.discrepancy < 1e-12
        assert m.reliable


def test_all_first_moments_antisymmetric_for_divfree(grid):
    w = ev.random_divfree(grid, 3)
    M = pr.all_first_moments(w, grid)
    assert np.allclose(M, -M.T, atol=1e-10 * np.abs(M).max())
    b = pr.first_moments(w, grid).b
    assert b == pytest.approx(0.5 * np.array([M[1, 2] - M[2, 1], M[2, 0] - M[0, 2], M[0, 1] - M[1, 0]]))


def test_first_moments_warn_on_boundary(grid):
    w = np.ones((3,) + grid.shape)
    with pytest.warns(pr.BoundaryDecayWarning):
        m = pr.first_moments(w, grid)
    assert not m.reliable
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pr.first_moments(w, grid, warn=False)


@settings(max_examples=10, deadline=None)
@given(beta=st.lists(st.floats(-5, 5), min_size=3, max_size=3), seed=st.integers(0, 1000))
def test_projection_recovers_beta(grid, beta, seed):
    r = ev.random_divfree(grid, seed)
    _, r = pr.project_E_minus1(r, grid)
    W = pr.profile_combination(beta, grid) + r
    got, R = pr.project_E_minus1(W, grid)
    assert np.allclose(got.b, beta, atol=1e-10)
    assert np.allclose(R, r, atol=1e-10)
    assert np.abs(pr.first_moments(R, grid).b).max() < 1e-12


def test_profile_combination_matches_basis(grid):
    beta = np.array([0.3, -1.0, 2.0])
    basis = pr.profile_basis(grid)
    assert np.allclose(pr.profile_combination(beta, grid), np.tensordot(beta, basis.f, axes=1), atol=1e-15)
    assert not basis.f.flags.writeable


def test_velocity_profile_is_biot_savart_of_f(grid):
    v = pr.velocity_profile(2, grid)
    curl = sp.inverse(sp.spectral_curl(sp.forward(v, grid), grid), grid)
    assert np.abs(curl - pr.eigenfunction_f(2, grid)).max() < 1e-10
    v[...] = 0.0  # a copy: the cache stays intact
    assert np.abs(pr.velocity_profile(2, grid)).max() > 0


def test_asymptotic_profile_at_t0_T1(grid):
    b = np.array([1.0, 2.0, -0.5])
    assert np.allclose(pr.asymptotic_profile(b, 0.0, 1.0, grid), pr.profile_combination(b, grid))
    with pytest.raises(ValueError):
        pr.asymptotic_profile(b, -1.0, 1.0, grid)
    with pytest.raises(ValueError):
        pr.asymptotic_profile(b, 0.0, 0.5, grid)
    with pytest.warns(pr.BoundaryDecayWarning):
        pr.asymptotic_profile(b, 60.0, 1.0, grid)


def test_asymptotic_profile_moments_are_conserved(grid):
    b = np.array([0.2, 0.0, 1.0])
    for t in (0.0, 1.0, 2.0):
        w = pr.asymptotic_profile(b, t, 1.0, grid)
        assert np.allclose(pr.first_moments(w, grid, warn=False).b, b, atol=1e-10)


def test_scaled_variables_route_agreement(grid):
    # the scaled asymptotic profile is sum beta_i f_i with beta = b / (t+T),
    # by relabelling and by interpolation
    b = np.array([1.0, -0.5, 0.25])
    t, T = 0.5, 1.0
    beta = b / (t + T)
    w = pr.asymptotic_profile(b, t, T, grid)
    sgrid, W = pr.scaled_view(w, grid, t, T)
    assert np.allclose(W, pr.profile_combination(beta, sgrid), atol=1e-15)
    W2 = pr.to_scaled(w, grid, t, T)
    assert np.abs(W2 - pr.profile_combination(beta, grid)).max() < 1e-9
    back = pr.from_scaled(W2, grid, t, T)
    assert np.abs(back - w).max() < 1e-9


def test_to_scaled_refuses_undecayed_field(grid):
    w = np.ones((3,) + grid.shape)
    with pytest.raises(ValueError):
        pr.to_scaled(w, grid, 1.0, 1.0)


def test_taper(grid):
    chi = pr.taper(grid)
    r = np.sqrt(grid.radius2)
    assert np.all((chi >= 0) & (chi <= 1))
    assert np.all(chi[r <= 0.45 * grid.box_length] == 1.0)
    assert np.all(chi[r >= 0.5 * grid.box_length] == 0.0)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_L_eigenvalue_minus_one(grid, i):
    f = pr.eigenfunction_f(i, grid)
    assert sp.l2_norm(pr.apply_L(f, grid) + f, grid) < 1e-8 * sp.l2_norm(f, grid)
    p = pr.weight_p(i, grid)
    inside = pr.taper(grid) >= 1
    assert np.abs(pr.apply_L_adjoint(p, grid) + p)[:, inside].max() < 1e-12 * np.abs(p).max()


def test_weighted_norms(grid):
    G = pr.gaussian(grid)
    assert pr.weighted_norm(G, grid, 0, 0) == pytest.approx(sp.l2_norm(G, grid), rel=1e-14)
    # (1 + r^2)^1 weight equals ||G||^2 + || |x| G ||^2
    n1 = pr.weighted_norm(G, grid, 1, 0) ** 2
    assert n1 == pytest.approx(pr.radial_moment_norm2(G, grid, 0) + pr.radial_moment_norm2(G, grid, 1))
    with pytest.raises(ValueError):
        pr.weighted_norm(G, grid, 5, 0)
    assert pr.h2_weighted_norm(G, grid) >= pr.weighted_norm(G, grid, 4, 0)


def test_boundary_ratio(grid):
    assert pr.decays_at_boundary(pr.gaussian(grid), grid)
    assert not pr.decays_at_boundary(np.ones(grid.shape), grid)
    assert pr.boundary_ratio(np.zeros(grid.shape), grid) == 0.0
