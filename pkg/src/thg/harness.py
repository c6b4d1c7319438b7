"""Experiment configuration and orchestration: calibrate, build a grid, compare.

A configuration is a single JSON document; every omitted field takes the
default in :data:`DEFAULTS` and the resolved document is written next to
every output. Initial states come from a counter-based generator keyed per
trajectory, so trajectory ``k`` is the same whether it is sampled alone or in
a batch.
"""
from __future__ import annotations

import copy
import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import CoarseGrid, ErrorConstantProfile, build_coarse_grid, richardson_profile
from .models import EPSILON, GaussianMixtureModel, Mixture, single_gaussian_model, two_mode_model
from .oracle import DEFAULT_SUBSTEPS, reference_oracle
from .sampler import ThgConfig, endpoint_error, sample_cfg, sample_thg
from .schedules import UNIFORM_T, make_fine_grid, make_flow_schedule, make_vp_schedule
from .solvers import make_solver

OUTPUT_DIR_ENV = "THG_OUTPUT_DIR"

DEFAULTS = {
    "schedule": {"kind": "vp", "beta_min": 0.1, "beta_max": 20.0, "T": 1.0, "spacing": UNIFORM_T},
    "model": {"preset": "single-gaussian", "mode": EPSILON, "dim": 8},
    "solver": "ddim",
    "N": 50,
    "omega": 3.5,
    "rho": 1.1,
    "p": None,
    "cap": None,
    "boost": 1.0,
    "boost_always": False,
    "i_hi": None,
    "calibration": {"batch": 100, "seed": 0},
    "evaluation": {"seeds": 20, "seed": 10_000, "oracle_substeps": DEFAULT_SUBSTEPS, "chunk": 10},
    "output_dir": "thg-output",
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "model":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _mixture(spec, dim):
    comps = []
    for c in spec:
        mean = np.broadcast_to(np.asarray(c["mean"], dtype=np.float64), (dim,))
        comps.append((float(c["weight"]), mean, float(c["scale"])))
    return Mixture.from_components(comps)


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        cfg = cls(_merge(DEFAULTS, data))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def __getitem__(self, key):
        return self.data[key]

    def validate(self):
        # constructing every component surfaces bad parameters early
        schedule = self.schedule()
        model = self.model()
        solver = self.solver()
        if solver.mode != model.mode:
            raise ValueError(f"solver {solver.kind!r} runs in {solver.mode} mode, model is {model.mode}")
        self.fine_grid(schedule)
        i_hi = self.i_hi
        if not 0 <= i_hi <= self["N"]:
            raise ValueError(f"i_hi must lie in [0, N], got {i_hi}")
        for section, key in (("calibration", "seed"), ("evaluation", "seed")):
            if not isinstance(self[section][key], int):
                raise ValueError(f"{section}.{key} must be an explicit integer")

    # -- component builders ------------------------------------------------
    def schedule(self):
        spec = self["schedule"]
        if spec["kind"] in ("vp", "variance-preserving-linear"):
            return make_vp_schedule(spec["beta_min"], spec["beta_max"], spec["T"])
        if spec["kind"] in ("flow", "flow-matching-linear"):
            return make_flow_schedule()
        raise ValueError(f"unknown schedule kind {spec['kind']!r}")

    def model(self):
        spec = dict(self["model"])
        mode = spec.pop("mode", EPSILON)
        dim = int(spec.pop("dim", 8))
        preset = spec.pop("preset", None)
        if preset == "single-gaussian":
            return single_gaussian_model(mode=mode, dim=dim, **spec)
        if preset == "two-mode":
            return two_mode_model(mode=mode, dim=dim, **spec)
        if preset is not None:
            raise ValueError(f"unknown model preset {preset!r}")
        return GaussianMixtureModel(mode, _mixture(spec["cond"], dim), _mixture(spec["uncond"], dim))

    def solver(self):
        mode = self["model"].get("mode", EPSILON)
        return make_solver(self["solver"], mode)

    def fine_grid(self, schedule=None):
        schedule = schedule or self.schedule()
        return make_fine_grid(schedule, self["N"], self["schedule"].get("spacing", UNIFORM_T))

    @property
    def i_hi(self) -> int:
        return self["N"] if self["i_hi"] is None else int(self["i_hi"])

    @property
    def p(self) -> int:
        return self.solver().order if self["p"] is None else int(self["p"])

    def output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self["output_dir"])


def initial_states(schedule, mode, dim, seeds):
    """One ``x_T`` per seed; scaled by ``sigma(t_max)`` in epsilon mode."""
    scale = float(schedule.sigma(schedule.t_max)) if mode == EPSILON else 1.0
    return np.stack([
        scale * np.random.Generator(np.random.Philox(int(s))).standard_normal(dim) for s in seeds
    ])


def calibrate(config: ExperimentConfig):
    """Richardson profile over the configured calibration batch."""
    schedule, model = config.schedule(), config.model()
    cal = config["calibration"]
    seeds = range(cal["seed"], cal["seed"] + int(cal["batch"]))
    batch = initial_states(schedule, model.mode, model.dim, seeds)
    return richardson_profile(model, schedule, config.fine_grid(schedule), config["omega"],
                              config.solver(), batch)


def grid_from_config(config: ExperimentConfig, profile: ErrorConstantProfile) -> CoarseGrid:
    return build_coarse_grid(profile, config["rho"], config.p, config["N"], config["cap"],
                             fine=config.fine_grid())


def thg_config(config: ExperimentConfig, grid: CoarseGrid) -> ThgConfig:
    return ThgConfig(config["omega"], grid, config.solver(), config["rho"], config["boost"],
                     config.i_hi, config["boost_always"])


REPORT_COLUMNS = ("method", "seed", "nfe", "endpoint_error", "max_dev_vs_cfg", "wall_time")


@dataclass
class ComparisonReport:
    rows: list = field(default_factory=list)

    def method_rows(self, method):
        return [r for r in self.rows if r["method"] == method and r["seed"] != "mean"]

    def aggregate(self):
        out = []
        for method in dict.fromkeys(r["method"] for r in self.rows if r["seed"] != "mean"):
            rows = self.method_rows(method)
            out.append({
                "method": method, "seed": "mean",
                **{k: float(np.mean([r[k] for r in rows])) for k in REPORT_COLUMNS[2:]},
            })
        return out

    @staticmethod
    def format_row(row) -> list:
        fmt = lambda v: repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
        return [fmt(row[k]) for k in REPORT_COLUMNS]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in self.rows + self.aggregate():
            writer.writerow(self.format_row(row))
        return buf.getvalue()


def compare(config: ExperimentConfig, grid: CoarseGrid, sink=None) -> ComparisonReport:
    """Guided baseline versus multirate sampling against the reference oracle.

    Seeds are processed in chunks; when ``sink`` (a text stream) is given each
    chunk's rows are written and flushed as soon as they exist.
    """
    schedule, model, solver = config.schedule(), config.model(), config.solver()
    fine = config.fine_grid(schedule)
    if grid.fine.N != fine.N or not np.allclose(grid.fine.times, fine.times):
        raise ValueError("coarse grid does not refine the configured fine grid")
    grid = CoarseGrid(fine, grid.indices, grid.rho, grid.p)
    ev = config["evaluation"]
    omega = config["omega"]
    thg = thg_config(config, grid)
    seeds = list(range(ev["seed"], ev["seed"] + int(ev["seeds"])))
    report = ComparisonReport()
    writer = None
    if sink is not None:
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        sink.flush()
    chunk = max(1, int(ev.get("chunk", 10)))
    for start in range(0, len(seeds), chunk):
        part = seeds[start:start + chunk]
        x_T = initial_states(schedule, model.mode, model.dim, part)
        reference = reference_oracle(model, schedule, omega, x_T, int(ev["oracle_substeps"]))
        tic = time.perf_counter()
        cfg_rec = sample_cfg(model, schedule, fine, omega, solver, x_T)
        cfg_time = (time.perf_counter() - tic) / len(part)
        tic = time.perf_counter()
        thg_rec = sample_thg(model, schedule, thg, x_T)
        thg_time = (time.perf_counter() - tic) / len(part)
        cfg_path = np.stack(cfg_rec.full_states)
        thg_dev = np.linalg.norm(np.stack(thg_rec.full_states) - cfg_path, axis=-1).max(axis=0)
        new_rows = []
        for method, rec, dev, wall in (("cfg", cfg_rec, np.zeros(len(part)), cfg_time),
                                       ("thg", thg_rec, thg_dev, thg_time)):
            err = endpoint_error(rec, reference)
            for k, seed in enumerate(part):
                new_rows.append({
                    "method": method, "seed": seed, "nfe": rec.nfe,
                    "endpoint_error": float(err[k]), "max_dev_vs_cfg": float(dev[k]),
                    "wall_time": wall,
                })
        report.rows.extend(new_rows)
        if writer is not None:
            for row in new_rows:
                writer.writerow(report.format_row(row))
            sink.flush()
    if writer is not None:
        for row in report.aggregate():
            writer.writerow(report.format_row(row))
        sink.flush()
    return report


def sample_one(config: ExperimentConfig, grid: CoarseGrid | None, method: str, index: int = 0):
    """Sample the ``index``-th evaluation trajectory with ``cfg`` or ``thg``."""
    schedule, model, solver = config.schedule(), config.model(), config.solver()
    fine = config.fine_grid(schedule)
    x_T = initial_states(schedule, model.mode, model.dim, [config["evaluation"]["seed"] + index])
    if method == "cfg":
        return sample_cfg(model, schedule, fine, config["omega"], solver, x_T)
    if method == "thg":
        if grid is None:
            raise ValueError("thg sampling needs a coarse grid")
        grid = CoarseGrid(fine, grid.indices, grid.rho, grid.p)
        return sample_thg(model, schedule, thg_config(config, grid), x_T)
    raise ValueError(f"unknown method {method!r}")
