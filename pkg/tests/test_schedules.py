import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from thg.schedules import (
    FineGrid, UNIFORM_INDEX, make_fine_grid, make_flow_schedule, make_vp_schedule,
)


def test_vp_endpoints():
    s = make_vp_schedule(0.1, 20.0, 1.0)
    assert s.alpha(0.0) == 1.0 and s.sigma(0.0) == 0.0
    assert s.alpha(1.0) == pytest.approx(np.exp(-5.025), rel=1e-14)


def test_vp_alpha_matches_quadrature():
    s = make_vp_schedule(0.3, 12.0, 2.0)
    beta = lambda u: 0.3 + (12.0 - 0.3) * u / 2.0
    for t in (0.1, 0.7, 1.3, 2.0):
        integral, _ = quad(beta, 0.0, t, epsabs=1e-14)
        assert s.alpha(t) == pytest.approx(np.exp(-0.5 * integral), rel=1e-12)
        assert s.alpha(t) ** 2 + s.sigma(t) ** 2 == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("args", [(0.0, 20.0, 1.0), (1.0, 0.5, 1.0), (0.1, 20.0, 0.0), (-1, 2, 1)])
def test_vp_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        make_vp_schedule(*args)


def test_flow_values():
    s = make_flow_schedule()
    assert (s.alpha(0.0), s.sigma(0.0)) == (1.0, 0.0)
    assert (s.alpha(1.0), s.sigma(1.0)) == (0.0, 1.0)
    assert (s.alpha(0.25), s.sigma(0.25)) == (0.75, 0.25)


def _check_drift_diffusion(s, t):
    # d alpha/dt = f alpha and d sigma^2/dt = 2 f sigma^2 + g^2
    h = 1e-5 * (s.t_max - s.t_min)
    da = (s.alpha(t + h) - s.alpha(t - h)) / (2 * h)
    dvar = (s.sigma(t + h) ** 2 - s.sigma(t - h) ** 2) / (2 * h)
    assert s.f(t) * s.alpha(t) == pytest.approx(da, rel=1e-4)
    # the right side cancels to beta * alpha^2; allow rounding of the g^2 term
    floor = 1e-12 * s.g2(t)
    assert 2 * s.f(t) * s.sigma(t) ** 2 + s.g2(t) == pytest.approx(dvar, rel=1e-4, abs=floor)


@pytest.mark.parametrize("make", [make_vp_schedule, make_flow_schedule])
def test_f_g_consistency_at_random_times(make):
    s = make()
    times = np.random.default_rng(1).uniform(s.t_min + 0.01, s.t_max - 0.01, 100)
    for t in times:
        _check_drift_diffusion(s, t)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.1, 30.0), st.floats(0.2, 5.0), st.floats(0.05, 0.95))
def test_vp_properties(beta_min, extra, T, frac):
    s = make_vp_schedule(beta_min, beta_min + extra, T)
    t = frac * T
    _check_drift_diffusion(s, t)
    grid = make_fine_grid(s, 17)
    assert np.all(np.diff(grid.times) < 0)
    assert grid.times[0] == T and grid.times[-1] == 0.0
    alphas = s.alpha(grid.times)
    assert np.all(np.diff(alphas) > 0)
    assert s.time_at_nsr(s.nsr(t)) == pytest.approx(t, rel=1e-9)


def test_fine_grid_examples():
    assert np.array_equal(make_fine_grid(make_flow_schedule(), 4).times, [1, 0.75, 0.5, 0.25, 0])
    vp = make_vp_schedule()
    assert np.array_equal(make_fine_grid(vp, 1).times, [1.0, 0.0])
    g = make_fine_grid(vp, 50)
    assert len(g) == 51 and g.N == 50 and np.all(np.diff(g.times) < 0)
    idx = make_fine_grid(vp, 50, UNIFORM_INDEX)
    assert idx.times[0] == 1.0 and idx.times[-1] == 0.0 and np.all(np.diff(idx.times) < 0)


def test_fine_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        make_fine_grid(make_flow_schedule(), 0)
    with pytest.raises(ValueError):
        FineGrid(np.array([0.0, 1.0]))
