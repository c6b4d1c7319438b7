"""Continuous-time noise schedules and fine timestep grids.

A schedule supplies the signal scale ``alpha(t)`` and noise scale ``sigma(t)``
of the forward process ``x_t = alpha(t) x_0 + sigma(t) n`` together with the
drift ``f(t) = d log alpha / dt`` and squared diffusion
``g2(t) = d sigma^2/dt - 2 f(t) sigma(t)^2`` of the probability-flow ODE

    dx/dt = f(t) x + g2(t) / (2 sigma(t)) * eps(x, t).

Two schedules are provided: a variance-preserving schedule with linear
``beta(t)`` and the linear interpolation used by flow-matching models.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VP_LINEAR = "variance-preserving-linear"
FLOW_LINEAR = "flow-matching-linear"

UNIFORM_T = "uniform-in-t"
UNIFORM_INDEX = "uniform-in-index-of-discrete-schedule"


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str
    t_min: float
    t_max: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (VP_LINEAR, FLOW_LINEAR):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")

    # -- internals ---------------------------------------------------------
    def _beta(self, t):
        p = self.params
        return p["beta_min"] + (p["beta_max"] - p["beta_min"]) * t / p["T"]

    def _beta_integral(self, t):
        p = self.params
        return p["beta_min"] * t + 0.5 * (p["beta_max"] - p["beta_min"]) * t**2 / p["T"]

    # -- schedule values ---------------------------------------------------
    def alpha(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == VP_LINEAR:
            return np.exp(-0.5 * self._beta_integral(t))
        return 1.0 - t

    def sigma(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == VP_LINEAR:
            # 1 - alpha^2 = -expm1(-B), accurate near t = 0
            return np.sqrt(-np.expm1(-self._beta_integral(t)))
        return t * 1.0

    def f(self, t):
        """Drift coefficient ``d log alpha / dt``."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == VP_LINEAR:
            return -0.5 * self._beta(t)
        with np.errstate(divide="ignore"):
            return -1.0 / (1.0 - t)

    def g2(self, t):
        """Squared diffusion coefficient ``d sigma^2/dt - 2 f sigma^2``."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == VP_LINEAR:
            return self._beta(t)
        with np.errstate(divide="ignore"):
            return 2.0 * t / (1.0 - t)

    def dalpha(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == VP_LINEAR:
            return -0.5 * self._beta(t) * self.alpha(t)
        return -np.ones_like(t)

    def dsigma(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == VP_LINEAR:
            a = self.alpha(t)
            with np.errstate(divide="ignore"):
                return 0.5 * self._beta(t) * a * a / self.sigma(t)
        return np.ones_like(t)

    def nsr(self, t):
        """Noise-to-signal ratio ``sigma / alpha``."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == VP_LINEAR:
            return np.sqrt(np.expm1(self._beta_integral(t)))
        with np.errstate(divide="ignore"):
            return t / (1.0 - t)

    def time_at_nsr(self, r):
        """Inverse of :meth:`nsr`."""
        r = np.asarray(r, dtype=np.float64)
        if self.kind == VP_LINEAR:
            p = self.params
            a = 0.5 * (p["beta_max"] - p["beta_min"]) / p["T"]
            b = p["beta_min"]
            level = np.log1p(r * r)
            # stable root of a t^2 + b t - level = 0
            return 2.0 * level / (b + np.sqrt(b * b + 4.0 * a * level))
        return r / (1.0 + r)

    def contains(self, t) -> bool:
        return self.t_min <= t <= self.t_max


def make_vp_schedule(beta_min: float = 0.1, beta_max: float = 20.0, T: float = 1.0) -> NoiseSchedule:
    """Variance-preserving schedule with ``beta(t)`` linear from ``beta_min`` to ``beta_max``."""
    if not (0 < beta_min < beta_max) or not T > 0:
        raise ValueError(
            f"need 0 < beta_min < beta_max and T > 0, got ({beta_min}, {beta_max}, {T})"
        )
    return NoiseSchedule(
        VP_LINEAR, 0.0, float(T),
        {"beta_min": float(beta_min), "beta_max": float(beta_max), "T": float(T)},
    )


def make_flow_schedule() -> NoiseSchedule:
    """Rectified-flow interpolation ``x_t = (1 - t) x_0 + t n`` on ``[0, 1]``."""
    return NoiseSchedule(FLOW_LINEAR, 0.0, 1.0, {})


@dataclass(frozen=True)
class FineGrid:
    times: np.ndarray
    spacing_rule: str = UNIFORM_T

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a fine grid needs at least two times")
        if np.any(np.diff(times) >= 0):
            raise ValueError("fine grid times must be strictly decreasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def N(self) -> int:
        return self.times.size - 1

    def __len__(self):
        return self.times.size

    def __getitem__(self, i):
        return self.times[i]


def make_fine_grid(
    schedule: NoiseSchedule,
    N: int,
    spacing_rule: str = UNIFORM_T,
    discrete_steps: int = 1000,
) -> FineGrid:
    """``N + 1`` times from ``schedule.t_max`` down to ``schedule.t_min``.

    With ``UNIFORM_INDEX`` the interior times are snapped to the nearest of
    ``discrete_steps`` equally spaced training timesteps, which is how DDPM-style
    discrete schedules subsample their index range.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    N = int(N)
    t_hi, t_lo = schedule.t_max, schedule.t_min
    times = np.linspace(t_hi, t_lo, N + 1)
    if spacing_rule == UNIFORM_INDEX:
        if discrete_steps < N:
            raise ValueError("discrete_steps must be at least N")
        span = t_hi - t_lo
        idx = np.round((times - t_lo) / span * discrete_steps)
        times = t_lo + idx / discrete_steps * span
        times[0], times[-1] = t_hi, t_lo
    elif spacing_rule != UNIFORM_T:
        raise ValueError(f"unknown spacing rule {spacing_rule!r}")
    return FineGrid(times, spacing_rule)
