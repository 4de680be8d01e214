
import numpy as np
import pytest

from secondgrade import evolution as ev
from secondgrade import profiles as pr
from secondgrade import spectral as sp


def bandlimited_divfree(grid, mmax, seed):
    """curl of a random field whose Fourier modes satisfy |m_j| <= mmax."""
    rng = np.random.default_rng(seed)
    m = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    keep = (np.abs(m)[:, None, None] <= mmax) & (np.abs(m)[None, :, None] <= mmax) \
        & (np.abs(m)[None, None, :] <= mmax)
    psi = np.real(np.fft.ifftn(np.where(keep, np.fft.fftn(rng.standard_normal((3,) + grid.shape),
                                                          axes=(1, 2, 3)), 0), axes=(1, 2, 3)))
    return sp.inverse(sp.spectral_curl(sp.forward(psi, grid), grid), grid)


def direct_convolution_rhs(w, grid, alpha, mmax):
    """-(1 + alpha k^2)^-1 i k x [(w - alpha Lap w) x u]^ by explicit sums over mode pairs,
    keeping output modes inside the two-thirds band."""
    n = grid.n
    scale = 2 * np.pi / grid.box_length
    modes = np.array([(a, b, c) for a in range(-mmax, mmax + 1)
                      for b in range(-mmax, mmax + 1) for c in range(-mmax, mmax + 1)])
    idx = tuple((modes % n).T)
    wh = np.fft.fftn(w, axes=(1, 2, 3))[(slice(None),) + idx] / n**3
    k = scale * modes.T
    k2 = np.sum(k**2, axis=0)
    uh = np.zeros_like(wh)
    nz = k2 > 0
    uh[:, nz] = 1j * np.cross(k[:, nz], wh[:, nz], axis=0) / k2[nz]
    qh = (1 + alpha * k2) * wh
    cut = n / 3
    out = {}
    for p in range(len(modes)):
        tgt = modes[p] + modes
        ok = np.all(np.abs(tgt) <= cut, axis=1)
        terms = np.cross(qh[:, p][:, None], uh[:, ok], axis=0)
        for t, v in zip(map(tuple, tgt[ok]), terms.T):
            out[t] = out.get(t, 0) + v
    res = np.zeros((3, n, n, n), dtype=complex)
    for t, v in out.items():
        kk = scale * np.array(t)
        kk2 = kk @ kk
        res[(slice(None),) + tuple(np.array(t) % n)] = -1j * np.cross(kk, v) / (1 + alpha * kk2)
    return res[..., : n // 2 + 1] * n**3


@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_nonlinear_rhs_against_direct_convolution(alpha):
    grid = sp.make_grid(16, 2 * np.pi)
    w = bandlimited_divfree(grid, 3, seed=4)
    params = ev.SimParams(alpha=alpha)
    got = ev.nonlinear_rhs(sp.forward(w, grid), grid, params)
    want = direct_convolution_rhs(w, grid, alpha, 3)
    assert np.abs(got - want).max() < 1e-10 * np.abs(want).max()


def test_nonlinear_rhs_removes_aliases():
    # with modes up to the band edge, the raw product aliases; the result still matches
    grid = sp.make_grid(16, 2 * np.pi)
    w = bandlimited_divfree(grid, 5, seed=9)
    got = ev.nonlinear_rhs(sp.forward(w, grid), grid, ev.SimParams(alpha=0.2))
    want = direct_convolution_rhs(w, grid, 0.2, 5)
    assert np.abs(got - want).max() < 1e-10 * np.abs(want).max()


def test_linear_symbol():
    p = ev.SimParams(alpha=0.5, epsilon=0.1)
    k2 = np.array([0.0, 1.0, 4.0])
    assert np.allclose(ev.linear_symbol(k2, p), -(k2 + 0.1 * k2**2) / (1 + 0.5 * k2))
    assert ev.linear_symbol(0.0, p) == 0.0


def test_heat_flow_is_exact():
    grid = sp.make_grid(32, 24.0)
    w0 = ev.make_initial_data("gaussian-random-divfree", 1.0, 3, grid)
    params = ev.SimParams(alpha=0.0, epsilon=0.0, dt=0.1, t_end=1.0, nonlinear=False)
    final = ev.evolve(w0, grid, params, enforce_horizon=False)
    exact = sp.inverse(np.exp(-grid.k2 * 1.0) * sp.forward(w0, grid), grid)
    assert np.abs(final.physical() - exact).max() < 1e-13 * np.abs(w0).max()


def test_linear_flow_with_alpha_and_epsilon_matches_closed_form():
    grid = sp.make_grid(32, 24.0)
    w0 = ev.make_initial_data("perturbed-profile", 1.0, 3, grid)
    params = ev.SimParams(alpha=0.7, epsilon=0.05, dt=0.25, t_end=1.0, nonlinear=False)
    final = ev.evolve(w0, grid, params, enforce_horizon=False)
    exact = ev.linear_evolution(w0, grid, params, 1.0)
    assert np.abs(final.physical() - exact).max() < 1e-13 * np.abs(w0).max()


def test_heun_is_second_order():
    grid = sp.make_grid(16, 12.0)
    w0 = ev.make_initial_data("perturbed-profile", 20.0, 1, grid)
    base = ev.SimParams(alpha=1.0, dt=0.1, t_end=0.4)

    def run(dt):
        return ev.evolve(w0, grid, base.with_(dt=dt), enforce_horizon=False).physical()

    ref = run(0.1 / 16)
    e1 = np.abs(run(0.1) - ref).max()
    e2 = np.abs(run(0.05) - ref).max()
    assert 3.4 < e1 / e2 < 4.6


def test_step_keeps_field_solenoidal_and_mean_free():
    grid = sp.make_grid(16, 12.0)
    w0 = ev.make_initial_data("perturbed-profile", 20.0, 2, grid)
    s = ev.step(ev.state_from_field(w0, grid), ev.SimParams(dt=0.05))
    assert sp.divergence_residual(s.what, grid) < 1e-13
    assert sp.mean_mode_ratio(s.what) < 1e-14
    assert s.t == pytest.approx(0.05)


def test_cfl_error_reports_suggested_dt():
    grid = sp.make_grid(16, 12.0)
    w0 = ev.make_initial_data("perturbed-profile", 1e4, 2, grid)
    with pytest.raises(ev.CFLError) as info:
        ev.step(ev.state_from_field(w0, grid), ev.SimParams(dt=1.0))
    err = info.value
    assert err.suggested_dt < err.dt
    assert err.suggested_dt == pytest.approx(0.5 * grid.h / err.umax)
    ev.step(ev.state_from_field(w0, grid), ev.SimParams(dt=0.9 * err.suggested_dt))


def test_divergence_is_reported():
    grid = sp.make_grid(16, 12.0)
    w0 = np.zeros((3,) + grid.shape)
    w0[0, 3, 3, 3] = np.nan
    with pytest.raises(ev.SimulationDiverged) as info:
        ev.evolve(w0, grid, ev.SimParams(dt=0.1, t_end=0.2), enforce_horizon=False)
    assert info.value.last_good_t == 0.0


def test_horizon_check():
    grid = sp.make_grid(16, 12.0)
    params = ev.SimParams(T=1.0, t_end=4.0)
    with pytest.raises(ev.HorizonError):
        ev.evolve(np.zeros((3,) + grid.shape), grid, params)
    ev.check_horizon(sp.make_grid(16, 14.0), params)


def test_observer_schedule():
    grid = sp.make_grid(16, 12.0)
    times = []
    params = ev.SimParams(dt=0.1, t_end=1.0, output_every=3, nonlinear=False)
    ev.evolve(np.zeros((3,) + grid.shape), grid, params, lambda t, s: times.append(round(t, 10)),
              enforce_horizon=False)
    assert times == [0.0, 0.3, 0.6, 0.9, 1.0]


@pytest.mark.parametrize("kw", [dict(alpha=-1), dict(epsilon=-1), dict(T=0.5), dict(theta=1.5),
                                dict(theta=0.0), dict(dt=0), dict(t_end=-1), dict(output_every=0),
                                dict(output_every=1.5), dict(cfl=0)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        ev.SimParams(**kw)


def test_epsilon_constraint_warning():
    assert ev.epsilon_constraint_ok(ev.SimParams(alpha=1.0, epsilon=0.1))
    with pytest.warns(UserWarning):
        assert not ev.epsilon_constraint_ok(ev.SimParams(alpha=0.0, epsilon=0.1))


@pytest.fixture(scope="module")
def grid():
    return sp.make_grid(64, 40.0)


@pytest.mark.parametrize("kind", ev.INIT_KINDS)
def test_initial_data_is_solenoidal_and_decaying(grid, kind):
    w0 = ev.make_initial_data(kind, 1.0, 5, grid, coeffs=(0.5, 1.0, -1.0), T=1.5)
    wh = sp.forward(w0, grid)
    assert sp.divergence_residual(wh, grid) < 1e-12
    assert sp.mean_mode_ratio(wh) < 1e-14
    assert pr.decays_at_boundary(w0, grid)
    assert np.array_equal(w0, ev.make_initial_data(kind, 1.0, 5, grid, coeffs=(0.5, 1.0, -1.0), T=1.5))


def test_profile_multiple_sits_on_the_ray(grid):
    c = np.array([0.5, 1.0, -1.0])
    for T in (1.0, 2.0):
        w0 = ev.make_initial_data("profile-multiple", 2.0, 0, grid, coeffs=c, T=T)
        assert np.abs(w0 - pr.asymptotic_profile(2.0 * c, 0.0, T, grid)).max() < 1e-12 * np.abs(w0).max()
        assert np.allclose(pr.first_moments(w0, grid).b, 2.0 * c, atol=1e-10)


def test_initial_data_errors(grid):
    with pytest.raises(ValueError):
        ev.make_initial_data("vortex-ring", 1.0, 0, grid)
    with pytest.raises(ValueError):
        ev.make_initial_data("profile-multiple", 1.0, 0, grid, T=0.5)


def test_random_amplitude_normalization(grid):
    sgrid = pr.scaled_grid(grid, 0.0, 1.0)
    w0 = ev.make_initial_data("gaussian-random-divfree", 1.0, 8, grid)
    ref = sp.l2_norm(pr.eigenfunction_f(1, sgrid), sgrid)
    assert sp.l2_norm(w0, grid) == pytest.approx(ref, rel=1e-10)


def test_smallness_scaled_and_unscaled_agree(grid):
    params = ev.SimParams(alpha=0.5, T=2.0)
    w0 = ev.make_initial_data("gaussian-random-divfree", 0.01, 2, grid, T=params.T)
    sgrid, W0 = pr.scaled_view(w0, grid, 0.0, params.T)
    a = ev.smallness_lhs(W0, sgrid, params)
    b = ev.smallness_lhs_unscaled(w0, grid, params)
    T = params.T
    assert a.threshold == b.threshold == pytest.approx(0.25)
    assert a.terms["grad"] == pytest.approx(b.terms["grad"], rel=1e-12)
    assert a.terms["lap"] == pytest.approx(b.terms["lap"], rel=1e-12)
    # (1 + |X|^2)^4 lies between 1 + |X|^8 and 8 (1 + |X|^8)
    low = b.terms["L2"] + b.terms["x4"]
    assert low <= a.terms["L2(4)"] <= 8 * low
    # the unscaled form carries alpha^2 T^-3/2 on || |x|^4 Lap w0 ||^2; the change of
    # variables gives alpha^2 T^-7/2, so the unscaled form is the stricter one for T >= 1
    assert b.terms["x4lap"] == pytest.approx(T**2 * a.terms["x4lap"], rel=1e-12)
