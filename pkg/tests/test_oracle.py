import numpy as np
import pytest

from affine import coefficients, exact
from conftest import draw
from thg.models import EPSILON, VELOCITY, single_gaussian_model, two_mode_model
from thg.oracle import reference_oracle, reference_split
from thg.sampler import endpoint_error, sample_cfg
from thg.schedules import make_fine_grid, make_flow_schedule, make_vp_schedule
from thg.solvers import make_solver, split_step

VP = make_vp_schedule()
FLOW = make_flow_schedule()


@pytest.mark.parametrize("mode,schedule", [(EPSILON, VP), (VELOCITY, FLOW)])
def test_unit_guidance_matches_affine_solution(mode, schedule):
    m = single_gaussian_model(mode, dim=8)
    x = draw(schedule, mode, 8, range(4))
    a, b = coefficients(schedule, 1.0, 1.0, 0.7, 0.0, 1.0)
    # stop just short of t = 0 where sigma' is singular for the VP schedule
    t_end = 1e-6
    got = reference_oracle(m, schedule, 1.0, x, t_to=t_end)
    ref = exact(a, b, x, schedule.t_max, t_end)
    assert np.linalg.norm(got - ref) <= 1e-8 * np.linalg.norm(ref)


@pytest.mark.parametrize("model,schedule,omega", [
    (single_gaussian_model(EPSILON), VP, 3.5),
    (single_gaussian_model(EPSILON), VP, 7.5),
    (two_mode_model(EPSILON), VP, 7.5),
    (two_mode_model(VELOCITY), FLOW, 7.5),
])
def test_doubling_substeps_changes_little(model, schedule, omega):
    x = draw(schedule, model.mode, 8, range(5))
    a = reference_oracle(model, schedule, omega, x, 10_000)
    b = reference_oracle(model, schedule, omega, x, 20_000)
    rel = np.linalg.norm(a - b, axis=-1) / np.linalg.norm(b, axis=-1)
    assert rel.max() < 1e-8


def test_sampler_error_against_oracle_shrinks_with_n():
    m = two_mode_model()
    x = draw(VP, EPSILON, 8, range(5))
    ref = reference_oracle(m, VP, 3.5, x)
    errs = [endpoint_error(sample_cfg(m, VP, make_fine_grid(VP, n), 3.5, make_solver("ddim"), x), ref).mean()
            for n in (10, 20, 50)]
    assert 0 < errs[2] < errs[1] < errs[0]


def test_split_reference_sums_to_full_reference():
    m = two_mode_model()
    x = draw(VP, EPSILON, 8, range(3))
    tort, hare = reference_split(m, VP, 3.5, x, np.zeros_like(x), 0.8, 0.7, 1e-4)
    full = reference_oracle(m, VP, 3.5, x, 1000, 0.8, 0.7)
    assert np.allclose(tort + hare, full, rtol=1e-12, atol=1e-14)


def test_too_few_substeps_rejected():
    with pytest.raises(ValueError):
        reference_oracle(single_gaussian_model(), VP, 2.0, np.zeros(8), 999)
