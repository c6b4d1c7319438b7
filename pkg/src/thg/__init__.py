"""Tortoise-and-hare multirate sampling for classifier-free guided diffusion ODEs."""
from .calibration import (
    CoarseGrid,
    ErrorConstantProfile,
    build_coarse_grid,
    error_bound_profile_report,
    full_coarse_grid,
    greedy_grid,
    jaccard,
    m_max,
    richardson_profile,
)
from .models import (
    EPSILON,
    VELOCITY,
    CallableModel,
    CountingModel,
    GaussianMixtureModel,
    Mixture,
    Prediction,
    cfg_combine,
    predict,
    single_gaussian_model,
    two_mode_model,
)
from .oracle import reference_oracle, reference_split
from .sampler import ThgConfig, TrajectoryRecord, endpoint_error, sample_cfg, sample_thg
from .schedules import FineGrid, NoiseSchedule, make_fine_grid, make_flow_schedule, make_vp_schedule
from .solvers import Solver, make_solver, split_step, step_full, step_with_fixed_prediction

__version__ = "0.1.0"
