import numpy as np
import pytest

from thg.diagnostics import derivative_norm_profile
from thg.models import (
    EPSILON, VELOCITY, CallableModel, CountingModel, GaussianMixtureModel, Mixture, Prediction,
    cfg_combine, predict, single_gaussian_model, two_mode_model,
)
from thg.schedules import make_fine_grid, make_flow_schedule, make_vp_schedule


def random_model(rng, mode=EPSILON, dim=4):
    def mixture():
        k = rng.integers(1, 4)
        w = rng.dirichlet(np.ones(k))
        w[-1] = 1.0 - w[:-1].sum()
        return Mixture(w, rng.normal(0, 1.5, (k, dim)), rng.uniform(0.3, 1.5, k))
    return GaussianMixtureModel(mode, mixture(), mixture())


def test_standard_gaussian_example():
    vp = make_vp_schedule()
    t = float(vp.time_at_nsr(0.75))
    assert vp.alpha(t) == pytest.approx(0.8, rel=1e-13)
    m = single_gaussian_model(dim=3, cond_mean=0.0, cond_scale=1.0)
    x = np.array([0.3, -1.2, 2.5])
    assert np.allclose(m.cond(x, t, vp), 0.6 * x, rtol=1e-12, atol=0)


def test_identical_branches_give_zero_delta():
    mix = Mixture([0.3, 0.7], [[1.0, 0.0], [-1.0, 2.0]], [0.5, 0.8])
    m = GaussianMixtureModel(EPSILON, mix, mix)
    p = predict(m, np.array([0.2, 0.4]), 0.5, make_vp_schedule())
    assert np.array_equal(p.delta, np.zeros(2))


def test_noise_vanishes_at_the_mean_as_sigma_shrinks():
    vp = make_vp_schedule()
    m = single_gaussian_model(dim=2, cond_mean=[1.0, -2.0])
    for t in (1e-3, 1e-5, 1e-7):
        x = vp.alpha(t) * np.array([1.0, -2.0])
        assert np.linalg.norm(m.cond(x, t, vp)) < 1e-12


def test_score_matches_finite_differences(rng):
    vp = make_vp_schedule()
    for _ in range(20):
        m = random_model(rng)
        t = rng.uniform(0.05, 0.95)
        x = rng.normal(0, 1.5, 4)
        h = 1e-5
        grad = np.array([
            (m.log_density(x + h * e, t, vp) - m.log_density(x - h * e, t, vp)) / (2 * h)
            for e in np.eye(4)
        ])
        expected = -vp.sigma(t) * grad
        got = m.cond(x, t, vp)
        assert np.linalg.norm(got - expected) <= 1e-6 * np.linalg.norm(expected)


@pytest.mark.parametrize("schedule", [make_vp_schedule(), make_flow_schedule()])
def test_velocity_and_epsilon_right_hand_sides_agree(rng, schedule):
    eps = single_gaussian_model(EPSILON, dim=5)
    vel = single_gaussian_model(VELOCITY, dim=5)
    for t in rng.uniform(0.05, 0.95, 25):
        x = rng.normal(0, 1, 5)
        rhs = schedule.f(t) * x + schedule.g2(t) / (2 * schedule.sigma(t)) * eps.cond(x, t, schedule)
        v = vel.cond(x, t, schedule)
        assert np.linalg.norm(v - rhs) <= 1e-8 * np.linalg.norm(rhs)


def test_calls_are_stateless(rng):
    m = random_model(rng, VELOCITY)
    x = rng.normal(size=(3, 4))
    a, b = m.predict(x, 0.4, make_flow_schedule()), m.predict(x, 0.4, make_flow_schedule())
    assert a.cond.tobytes() == b.cond.tobytes() and a.uncond.tobytes() == b.uncond.tobytes()


def test_cfg_combine_identities(rng):
    p = Prediction.from_branches(rng.normal(size=6), rng.normal(size=6))
    assert np.array_equal(cfg_combine(p, 1.0), p.cond)
    assert np.allclose(cfg_combine(p, 0.0), p.uncond, atol=1e-15)
    assert np.allclose(cfg_combine(p, 7.5), p.uncond + 7.5 * p.delta, atol=1e-12)


def test_batched_prediction_matches_rows(rng):
    m = two_mode_model(dim=8)
    x = rng.normal(size=(5, 8))
    batch = m.cond(x, 0.3, make_vp_schedule())
    for k in range(5):
        assert np.allclose(batch[k], m.cond(x[k], 0.3, make_vp_schedule()), rtol=1e-14, atol=0)


def test_input_validation():
    m = single_gaussian_model(dim=3)
    with pytest.raises(ValueError):
        m.cond(np.zeros(4), 0.5, make_vp_schedule())
    with pytest.raises(ValueError):
        m.cond(np.zeros(3), 1.5, make_vp_schedule())
    with pytest.raises(ValueError):
        Mixture([0.5, 0.6], [[0.0], [1.0]], [1.0, 1.0])
    with pytest.raises(ValueError):
        Mixture([1.0], [[0.0]], [0.0])
    with pytest.raises(ValueError):
        GaussianMixtureModel("score", m.cond_mixture, m.uncond_mixture)


def test_counting_model_counts_branch_calls():
    c = CountingModel(CallableModel(VELOCITY, 2, lambda x, t: x, lambda x, t: -x))
    c.predict(np.ones((10, 2)), 0.5, make_flow_schedule())
    c.cond(np.ones(2), 0.5, make_flow_schedule())
    assert c.calls == 3


def test_derivative_norms_vanish_without_guidance_difference():
    vp = make_vp_schedule()
    m = single_gaussian_model()
    same = GaussianMixtureModel(EPSILON, m.cond_mixture, m.cond_mixture)
    d = derivative_norm_profile(same, vp, make_fine_grid(vp, 20), 3.5, 5)
    assert np.all(d.guidance_mean == 0)
    d = derivative_norm_profile(m, vp, make_fine_grid(vp, 20), 3.5, 5)
    assert np.all(np.isfinite(d.cond_mean)) and np.all(d.cond_mean >= 0) and np.all(d.guidance_std >= 0)


@pytest.mark.parametrize("mode", [EPSILON, VELOCITY])
def test_guidance_changes_more_slowly_than_the_noise_estimate(mode):
    # measured fractions: 0.88 (epsilon), 0.76 (velocity)
    schedule = make_vp_schedule() if mode == EPSILON else make_flow_schedule()
    d = derivative_norm_profile(two_mode_model(mode), schedule, make_fine_grid(schedule, 50), 3.5, 20)
    assert np.mean(d.guidance_mean < d.cond_mean) > 0.5
