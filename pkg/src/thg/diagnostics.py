"""Time-derivative norms of the two guided branches along sampled trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampler import sample_cfg
from .schedules import FineGrid, NoiseSchedule
from .solvers import Solver, make_solver


@dataclass(frozen=True)
class DerivativeNorms:
    times: np.ndarray  # left end of each fine interval
    cond_mean: np.ndarray
    cond_std: np.ndarray
    guidance_mean: np.ndarray
    guidance_std: np.ndarray


def derivative_norm_profile(model, schedule: NoiseSchedule, grid: FineGrid, omega, trajectories: int,
                            seed: int = 0, solver: Solver | None = None) -> DerivativeNorms:
    """Finite-difference norms ``|d cond/dt|`` and ``|d delta/dt|`` per interval.

    Trajectories come from ordinary guided sampling started at
    ``sigma(t_max) * N(0, I)`` draws from a seeded generator.
    """
    if trajectories < 1:
        raise ValueError("need at least one trajectory")
    if solver is None:
        solver = make_solver("ddim" if model.mode == "epsilon" else "euler")
    rng = np.random.Generator(np.random.Philox(seed))
    x_T = float(schedule.sigma(grid[0])) * rng.standard_normal((trajectories, model.dim))
    record = sample_cfg(model, schedule, grid, omega, solver, x_T)
    preds = [model.predict(x, t, schedule) for x, t in zip(record.full_states, grid.times)]
    dt = -np.diff(grid.times)[:, None]
    cond = np.stack([np.linalg.norm(b.cond - a.cond, axis=-1) for a, b in zip(preds, preds[1:])]) / dt
    guid = np.stack([np.linalg.norm(b.delta - a.delta, axis=-1) for a, b in zip(preds, preds[1:])]) / dt
    return DerivativeNorms(
        grid.times[:-1].copy(), cond.mean(axis=1), cond.std(axis=1), guid.mean(axis=1), guid.std(axis=1)
    )
