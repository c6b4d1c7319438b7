"""Baseline guided sampling and the tortoise-and-hare multirate sampler.

The guided prediction ``cond + (omega - 1) * delta`` is split between two
states whose sum is the sample: the tortoise ``x_T`` is driven by the
conditional prediction on every fine step, the hare ``x_H`` by the guidance
difference, refreshed only at coarse indices. Between coarse indices the hare
is obtained by integrating from its last anchor straight to each fine time.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .calibration import CoarseGrid
from .models import CountingModel
from .schedules import FineGrid, NoiseSchedule
from .solvers import Solver, step_full, step_with_fixed_prediction


@dataclass(frozen=True)
class ThgConfig:
    omega: float
    grid: CoarseGrid
    solver: Solver
    rho: float = 1.0
    boost: float = 1.0
    i_hi: int | None = None
    # apply the boost on every coarse leap, including single-step ones
    boost_always: bool = False

    def __post_init__(self):
        N = self.grid.fine.N
        if self.i_hi is None:
            object.__setattr__(self, "i_hi", N)
        if not 0 <= self.i_hi <= N:
            raise ValueError(f"i_hi must lie in [0, {N}], got {self.i_hi}")
        if self.omega < 0:
            raise ValueError("guidance scale must be non-negative")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.boost < 1:
            raise ValueError("boost factor must be >= 1")
        if self.solver.evals_per_step != 1:
            raise ValueError(
                "multirate sampling needs a single-evaluation solver (ddim or euler); "
                f"got {self.solver.kind!r}"
            )

    @property
    def N(self) -> int:
        return self.grid.fine.N

    def projected_nfe(self) -> int:
        return self.N + sum(1 for i in self.grid.indices if i < min(self.i_hi, self.N))


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    tortoise_states: list
    hare_states: list
    full_states: list
    nfe: int
    coarse_events: list = field(default_factory=list)

    @property
    def endpoint(self):
        return self.full_states[-1]

    def to_rows(self, trajectory: int = 0):
        """Per-index norms ``(i, t, |x_T|, |x_H|, |x|)`` for one trajectory."""
        if len(self.full_states) != len(self.times):
            raise ValueError("trajectory was sampled without retaining states")
        rows = []
        for i, t in enumerate(self.times):
            vecs = [np.atleast_2d(s[i])[trajectory] for s in
                    (self.tortoise_states, self.hare_states, self.full_states)]
            rows.append((i, float(t), *(float(np.linalg.norm(v)) for v in vecs)))
        return rows

    def to_json(self, trajectory: int = 0) -> dict:
        pick = lambda states: [np.atleast_2d(s)[trajectory].tolist() for s in states]
        return {
            "times": [float(t) for t in self.times],
            "nfe": int(self.nfe),
            "coarse_events": [list(ev) for ev in self.coarse_events],
            "tortoise_states": pick(self.tortoise_states),
            "hare_states": pick(self.hare_states),
            "full_states": pick(self.full_states),
        }

    def write_csv(self, path, trajectory: int = 0):
        with open(path, "w", newline="") as fh:
            fh.write("i,t,norm_tortoise,norm_hare,norm_full\n")
            for i, t, a, b, c in self.to_rows(trajectory):
                fh.write(f"{i},{t!r},{a!r},{b!r},{c!r}\n")

    def write_json(self, path, trajectory: int = 0):
        with open(path, "w") as fh:
            json.dump(self.to_json(trajectory), fh)
            fh.write("\n")


def sample_cfg(model, schedule: NoiseSchedule, grid: FineGrid, omega, solver: Solver, x_T,
               keep_states: bool = True) -> TrajectoryRecord:
    """Classifier-free guided sampling on the full fine grid."""
    x = np.asarray(x_T, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise ValueError(f"x_T has dimension {x.shape[-1]}, model expects {model.dim}")
    counted = CountingModel(model)
    states = [x]
    for i in range(grid.N):
        x, _ = step_full(solver, counted, x, omega, grid[i], grid[i + 1], schedule)
        if keep_states:
            states.append(x)
        else:
            states[0] = x
    zeros = [np.zeros_like(s) for s in states]
    return TrajectoryRecord(grid.times, states, zeros, states, counted.calls)


def sample_thg(model, schedule: NoiseSchedule, cfg: ThgConfig, x_T,
               keep_states: bool = True) -> TrajectoryRecord:
    """Multirate guided sampling.

    Unconditional evaluations happen only at coarse indices below ``cfg.i_hi``;
    from ``i_hi`` on the guidance difference is taken as zero and the hare
    follows the drift term alone. Leaps spanning two or more fine steps use the
    boosted difference ``boost * delta``.
    """
    fine = cfg.grid.fine
    N, times, solver, omega = fine.N, fine.times, cfg.solver, cfg.omega
    x_tort = np.asarray(x_T, dtype=np.float64)
    if x_tort.shape[-1] != model.dim:
        raise ValueError(f"x_T has dimension {x_tort.shape[-1]}, model expects {model.dim}")

    counted = CountingModel(model)
    anchors = set(cfg.grid.indices)
    if cfg.i_hi < N:
        # the hare must restart at the truncation point so no stale guidance leaks past it
        anchors.add(cfg.i_hi)
    anchor_list = sorted(anchors)
    next_anchor = {a: b for a, b in zip(anchor_list, anchor_list[1:])}

    hare = {0: np.zeros_like(x_tort)}
    tort_states, hare_states = [x_tort], [hare[0]]
    events = []
    for i in range(N):
        x_hare = hare.pop(i)
        t_i = times[i]
        cond = counted.cond(x_tort + x_hare, t_i, schedule)
        x_next = step_with_fixed_prediction(solver, x_tort, cond, t_i, times[i + 1], schedule)
        if i in anchors:
            j = next_anchor[i]
            m = j - i
            if i < cfg.i_hi:
                delta = cond - counted.uncond(x_tort + x_hare, t_i, schedule)
                boosted = cfg.boost != 1.0 and (m >= 2 or cfg.boost_always)
                if boosted:
                    delta = cfg.boost * delta
                hare_pred = (omega - 1.0) * delta
            else:
                boosted = False
                hare_pred = np.zeros_like(x_hare)
            events.append((i, m, boosted))
            for k in range(i + 1, j + 1):
                hare[k] = step_with_fixed_prediction(solver, x_hare, hare_pred, t_i, times[k], schedule)
        x_tort = x_next
        if keep_states:
            tort_states.append(x_tort)
            hare_states.append(hare[i + 1])
        else:
            tort_states[0], hare_states[0] = x_tort, hare[i + 1]
    full_states = [a + b for a, b in zip(tort_states, hare_states)]
    return TrajectoryRecord(times, tort_states, hare_states, full_states, counted.calls, events)


def endpoint_error(record: TrajectoryRecord, reference):
    """L2 distance between the sampled ``x_0`` and a reference endpoint."""
    diff = np.asarray(record.endpoint) - np.asarray(reference)
    return np.linalg.norm(diff, axis=-1)
