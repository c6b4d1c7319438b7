"""Single-step integrators for the guided diffusion ODE.

Two ODE forms are covered. In epsilon mode the right-hand side is
semi-linear, ``f(t) x + g2(t) / (2 sigma) eps``, and the frozen-prediction
step is the DDIM update (exact variation of constants with ``eps`` held
fixed). In velocity mode the ODE is ``dx/dt = v`` and the frozen step is an
explicit Euler update.

``midpoint2`` re-evaluates the model at an interior point and is second
order. In epsilon mode the interior point halves the noise-to-signal ratio
``sigma / alpha``, the variable in which the DDIM step is an Euler step; in
velocity mode it is the usual time midpoint.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import EPSILON, VELOCITY, cfg_combine
from .schedules import NoiseSchedule

DDIM = "ddim"
EULER = "euler"
MIDPOINT2 = "midpoint2"

_ORDERS = {DDIM: 1, EULER: 1, MIDPOINT2: 2}


@dataclass(frozen=True)
class Solver:
    kind: str
    mode: str

    def __post_init__(self):
        if self.kind not in _ORDERS:
            raise ValueError(f"unknown solver {self.kind!r}; choose from {sorted(_ORDERS)}")
        if self.mode not in (EPSILON, VELOCITY):
            raise ValueError(f"unknown prediction mode {self.mode!r}")
        if self.kind == DDIM and self.mode != EPSILON:
            raise ValueError("ddim integrates noise predictions; use mode='epsilon'")
        if self.kind == EULER and self.mode != VELOCITY:
            raise ValueError("euler integrates velocity predictions; use mode='velocity'")

    @property
    def order(self) -> int:
        return _ORDERS[self.kind]

    @property
    def evals_per_step(self) -> int:
        """Guided-prediction evaluation points per full step."""
        return 2 if self.kind == MIDPOINT2 else 1

    def step(self, x, pred, t_from, t_to, schedule):
        return step_with_fixed_prediction(self, x, pred, t_from, t_to, schedule)

    def interior_time(self, t_from, t_to, schedule: NoiseSchedule) -> float:
        if self.mode == VELOCITY:
            return 0.5 * (t_from + t_to)
        r_mid = 0.5 * (schedule.nsr(t_from) + schedule.nsr(t_to))
        return float(schedule.time_at_nsr(r_mid))


def make_solver(name: str, mode: str | None = None) -> Solver:
    """Solver by config name: ``"ddim"``, ``"euler"`` or ``"midpoint2"``."""
    if mode is None:
        mode = {DDIM: EPSILON, EULER: VELOCITY}.get(name)
        if mode is None:
            raise ValueError(f"solver {name!r} needs an explicit mode")
    return Solver(name, mode)


def _check_interval(t_from, t_to, schedule):
    if t_to > t_from:
        raise ValueError(f"solver steps run backwards in time; got t_from={t_from} < t_to={t_to}")
    if not (schedule.contains(t_from) and schedule.contains(t_to)):
        raise ValueError(
            f"step [{t_to}, {t_from}] leaves schedule range [{schedule.t_min}, {schedule.t_max}]"
        )


def step_with_fixed_prediction(solver: Solver, x, pred, t_from, t_to, schedule: NoiseSchedule):
    """Advance ``x`` from ``t_from`` to ``t_to`` holding ``pred`` constant."""
    _check_interval(t_from, t_to, schedule)
    if solver.mode == VELOCITY:
        return x + (t_to - t_from) * pred
    a_from = float(schedule.alpha(t_from))
    if a_from <= 0.0:
        raise ValueError(f"epsilon-mode step needs alpha(t_from) > 0, got t_from={t_from}")
    ratio = float(schedule.alpha(t_to)) / a_from
    return ratio * x + (float(schedule.sigma(t_to)) - ratio * float(schedule.sigma(t_from))) * pred


def step_full(solver: Solver, model, x, omega, t_from, t_to, schedule: NoiseSchedule):
    """One classifier-free guided step; returns ``(x_next, nfe_used)``.

    Conditional and unconditional evaluations count separately.
    """
    pred = cfg_combine(model.predict(x, t_from, schedule), omega)
    if solver.kind != MIDPOINT2:
        return step_with_fixed_prediction(solver, x, pred, t_from, t_to, schedule), 2
    t_mid = solver.interior_time(t_from, t_to, schedule)
    x_mid = step_with_fixed_prediction(solver, x, pred, t_from, t_mid, schedule)
    pred_mid = cfg_combine(model.predict(x_mid, t_mid, schedule), omega)
    return step_with_fixed_prediction(solver, x, pred_mid, t_from, t_to, schedule), 4


def split_step(solver: Solver, model, x_tort, x_hare, omega, t_from, t_to, schedule, start=None):
    """Advance the tortoise/hare pair together over one step.

    The tortoise is driven by the conditional prediction and the hare by
    ``(omega - 1) * delta``; their sum follows the guided ODE. ``start`` may
    carry the :class:`Prediction` already computed at ``(x_tort + x_hare, t_from)``.
    Returns ``(x_tort_next, x_hare_next, prediction_at_start)``.
    """
    if start is None:
        start = model.predict(x_tort + x_hare, t_from, schedule)
    cond, hare_pred = start.cond, (omega - 1.0) * start.delta
    if solver.kind == MIDPOINT2:
        t_mid = solver.interior_time(t_from, t_to, schedule)
        mid_t = step_with_fixed_prediction(solver, x_tort, cond, t_from, t_mid, schedule)
        mid_h = step_with_fixed_prediction(solver, x_hare, hare_pred, t_from, t_mid, schedule)
        mid = model.predict(mid_t + mid_h, t_mid, schedule)
        cond, hare_pred = mid.cond, (omega - 1.0) * mid.delta
    return (
        step_with_fixed_prediction(solver, x_tort, cond, t_from, t_to, schedule),
        step_with_fixed_prediction(solver, x_hare, hare_pred, t_from, t_to, schedule),
        start,
    )
