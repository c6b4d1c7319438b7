"""Coarse-grid calibration from Richardson error estimates.

For each fine interval the tortoise and hare branches are advanced once with
the full step and once with two half steps; the norm of the difference is
proportional to each branch's local error constant. A hare leap of ``m`` fine
steps keeps the hare/tortoise error ratio ``m**p * |c_H| / |c_T|`` below
``rho`` when ``m <= (rho |c_T| / |c_H|)**(1/p)``, which fixes the largest
admissible leap at every fine index. The coarse grid is then built greedily,
always leaping as far as allowed.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .schedules import FineGrid, NoiseSchedule, make_fine_grid
from .solvers import Solver, split_step

PROFILE_COLUMNS = ("index", "t", "tortoise_mean", "tortoise_std", "hare_mean", "hare_std", "m_max")


@dataclass(frozen=True)
class CoarseGrid:
    fine: FineGrid
    indices: tuple
    rho: float | None = None
    p: int | None = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        N = self.fine.N
        if not idx or idx[0] != 0 or idx[-1] != N:
            raise ValueError(f"coarse indices must start at 0 and end at {N}, got {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("coarse indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def to_json(self) -> dict:
        return {"N": self.fine.N, "rho": self.rho, "p": self.p, "indices": list(self.indices)}

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def from_json(cls, data: dict, fine: FineGrid) -> "CoarseGrid":
        if int(data["N"]) != fine.N:
            raise ValueError(f"grid file has N={data['N']} but the fine grid has N={fine.N}")
        return cls(fine, tuple(data["indices"]), data.get("rho"), data.get("p"))

    @classmethod
    def load(cls, path, schedule: NoiseSchedule, spacing_rule=None) -> "CoarseGrid":
        with open(path) as fh:
            data = json.load(fh)
        kwargs = {} if spacing_rule is None else {"spacing_rule": spacing_rule}
        return cls.from_json(data, make_fine_grid(schedule, int(data["N"]), **kwargs))


def full_coarse_grid(fine: FineGrid) -> CoarseGrid:
    """Every fine index is coarse: multirate sampling reduces to plain guidance."""
    return CoarseGrid(fine, tuple(range(fine.N + 1)))


@dataclass(frozen=True)
class ErrorConstantProfile:
    times: np.ndarray
    per_step_tortoise: np.ndarray
    per_step_hare: np.ndarray
    tortoise_std: np.ndarray
    hare_std: np.ndarray
    batch_size: int

    @property
    def N(self) -> int:
        return len(self.per_step_tortoise)

    def to_csv(self, rho=1.0, p=1, cap=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(PROFILE_COLUMNS)
        for row in error_bound_profile_report(self, rho, p, cap):
            writer.writerow([row[0], *(repr(float(v)) for v in row[1:6]), row[6]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, batch_size: int = 0) -> "ErrorConstantProfile":
        reader = csv.DictReader(io.StringIO(text))
        missing = {"t", "tortoise_mean", "hare_mean"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"profile CSV lacks columns {sorted(missing)}")
        rows = list(reader)
        if not rows:
            raise ValueError("profile CSV has no rows")
        col = lambda name, default=0.0: np.array(
            [float(r[name]) if r.get(name) not in (None, "") else default for r in rows]
        )
        tort, hare = col("tortoise_mean"), col("hare_mean")
        if np.any(tort < 0) or np.any(hare < 0) or not np.all(np.isfinite(tort + hare)):
            raise ValueError("profile entries must be finite and non-negative")
        return cls(col("t"), tort, hare, col("tortoise_std"), col("hare_std"), batch_size)


def richardson_profile(model, schedule: NoiseSchedule, grid: FineGrid, omega, solver: Solver,
                       batch) -> ErrorConstantProfile:
    """Per-step Richardson difference norms of both branches, averaged over a batch.

    The outer trajectory follows the single-step solution so that it tracks the
    ordinary guided sampler. ``batch`` is an array of initial states, shape
    ``(B, dim)``.
    """
    x_tort = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if x_tort.shape[0] == 0:
        raise ValueError("calibration batch is empty")
    if x_tort.shape[-1] != model.dim:
        raise ValueError(f"batch has dimension {x_tort.shape[-1]}, model expects {model.dim}")
    x_hare = np.zeros_like(x_tort)
    N, t = grid.N, grid.times
    tort_norms = np.empty((N, x_tort.shape[0]))
    hare_norms = np.empty_like(tort_norms)
    for i in range(N):
        one_t, one_h, start = split_step(solver, model, x_tort, x_hare, omega, t[i], t[i + 1], schedule)
        t_half = 0.5 * (t[i] + t[i + 1])
        half_t, half_h, _ = split_step(solver, model, x_tort, x_hare, omega, t[i], t_half, schedule, start)
        two_t, two_h, _ = split_step(solver, model, half_t, half_h, omega, t_half, t[i + 1], schedule)
        tort_norms[i] = np.linalg.norm(one_t - two_t, axis=-1)
        hare_norms[i] = np.linalg.norm(one_h - two_h, axis=-1)
        x_tort, x_hare = one_t, one_h
    return ErrorConstantProfile(
        grid.times[:-1].copy(),
        tort_norms.mean(axis=1), hare_norms.mean(axis=1),
        tort_norms.std(axis=1), hare_norms.std(axis=1),
        x_tort.shape[0],
    )


def hare_floor(tortoise: float) -> float:
    return 1e-12 * (tortoise + 1e-300)


def m_max(tortoise: float, hare: float, rho: float, p: int, cap: int) -> int:
    """Largest admissible hare leap, ``floor((rho * tortoise / hare) ** (1/p))``.

    Clamped to ``[1, cap]``; a hare constant at or below :func:`hare_floor`
    allows the full ``cap``.
    """
    if rho <= 0 or p < 1 or cap < 1:
        raise ValueError("need rho > 0, p >= 1 and cap >= 1")
    if hare <= hare_floor(tortoise):
        return int(cap)
    bound = rho * tortoise / hare
    if not math.isfinite(bound):
        return int(cap)
    m = math.floor(bound ** (1.0 / p))
    # guard the float root against landing just below an exact integer
    while (m + 1) ** p <= bound:
        m += 1
    while m > 0 and m**p > bound:
        m -= 1
    return int(min(cap, max(1, m)))


def greedy_grid(leaps, N: int) -> tuple:
    """Walk the fine grid from index 0, leaping ``leaps[i]`` from each visited index.

    ``leaps`` is a sequence indexed by fine index or a callable ``i -> int``.
    The last fine index ``N`` is always appended.
    """
    leap = leaps if callable(leaps) else leaps.__getitem__
    indices = []
    i = 0
    while i < N:
        indices.append(i)
        step = int(leap(i))
        if step < 1:
            raise ValueError(f"leap at index {i} must be at least 1, got {step}")
        i += step
    indices.append(N)
    return tuple(indices)


def leap_limits(profile: ErrorConstantProfile, rho: float, p: int, cap: int | None = None) -> list:
    N = profile.N
    limits = []
    for i in range(N):
        c = N - i if cap is None else min(cap, N - i)
        limits.append(m_max(profile.per_step_tortoise[i], profile.per_step_hare[i], rho, p, c))
    return limits


def build_coarse_grid(profile: ErrorConstantProfile, rho: float, p: int, N: int | None = None,
                      cap: int | None = None, fine: FineGrid | None = None) -> CoarseGrid:
    """Coarse grid whose leaps respect the error-ratio threshold ``rho``."""
    if N is None:
        N = profile.N
    if profile.N != N:
        raise ValueError(f"profile has {profile.N} steps, expected {N}")
    if fine is None:
        times = np.append(profile.times, 0.0) if len(profile.times) == N else None
        fine = FineGrid(times) if times is not None else FineGrid(np.linspace(1.0, 0.0, N + 1))
    indices = greedy_grid(leap_limits(profile, rho, p, cap), N)
    return CoarseGrid(fine, indices, float(rho), int(p))


def error_bound_profile_report(profile: ErrorConstantProfile, rho: float = 1.0, p: int = 1,
                               cap: int | None = None) -> list:
    """Rows ``(index, t, tort_mean, tort_std, hare_mean, hare_std, m_max)``."""
    limits = leap_limits(profile, rho, p, cap)
    return [
        (i, float(profile.times[i]),
         float(profile.per_step_tortoise[i]), float(profile.tortoise_std[i]),
         float(profile.per_step_hare[i]), float(profile.hare_std[i]),
         limits[i])
        for i in range(profile.N)
    ]


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    return len(a & b) / len(a | b)
