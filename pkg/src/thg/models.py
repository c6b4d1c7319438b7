"""Closed-form guided prediction oracles.

The data distributions are isotropic Gaussian mixtures, one for the
conditional branch ``p(x0 | c)`` and one for the unconditional branch
``p(x0)``. Under the forward process every component stays Gaussian,

    p_t(x) = sum_k w_k N(x; alpha_t mu_k, (alpha_t^2 s_k^2 + sigma_t^2) I),

so the optimal noise prediction ``-sigma_t grad log p_t`` and the optimal
probability-flow velocity are available exactly. All routines accept a
leading batch axis: ``x`` has shape ``(..., dim)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .schedules import NoiseSchedule

EPSILON = "epsilon"
VELOCITY = "velocity"


@dataclass(frozen=True)
class Prediction:
    cond: np.ndarray
    uncond: np.ndarray
    delta: np.ndarray

    @classmethod
    def from_branches(cls, cond, uncond):
        return cls(cond, uncond, cond - uncond)


def cfg_combine(p: Prediction, omega: float) -> np.ndarray:
    """Guided prediction ``cond + (omega - 1) * delta``.

    Algebraically the same as ``uncond + omega * delta``.
    """
    return p.cond + (omega - 1.0) * p.delta


@dataclass(frozen=True)
class Mixture:
    weights: np.ndarray
    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        s = np.atleast_1d(np.asarray(self.scales, dtype=np.float64))
        if not (w.shape[0] == mu.shape[0] == s.shape[0]):
            raise ValueError("weights, means and scales must have one entry per component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must be non-negative and sum to 1, got {w}")
        if np.any(s <= 0):
            raise ValueError("component scales must be strictly positive")
        for arr in (w, mu, s):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "scales", s)

    @classmethod
    def from_components(cls, components: Sequence[tuple]) -> "Mixture":
        """Build from ``(weight, mean, scale)`` triples."""
        w, mu, s = zip(*components)
        return cls(np.array(w), np.stack([np.asarray(m, dtype=np.float64) for m in mu]), np.array(s))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def _marginal(self, x, alpha, sigma):
        # (..., K, dim) offsets and (K,) variances of the noised components
        diff = x[..., None, :] - alpha * self.means
        var = alpha * alpha * self.scales**2 + sigma * sigma
        return diff, var

    def _log_terms(self, diff, var):
        d = diff.shape[-1]
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logw - 0.5 * np.sum(diff * diff, axis=-1) / var - 0.5 * d * np.log(2 * np.pi * var)

    def responsibilities(self, x, alpha, sigma):
        diff, var = self._marginal(x, alpha, sigma)
        logits = self._log_terms(diff, var)
        logits = logits - logits.max(axis=-1, keepdims=True)
        r = np.exp(logits)
        return r / r.sum(axis=-1, keepdims=True), diff, var

    def log_density(self, x, alpha, sigma):
        diff, var = self._marginal(np.asarray(x, dtype=np.float64), alpha, sigma)
        logits = self._log_terms(diff, var)
        top = logits.max(axis=-1)
        return top + np.log(np.sum(np.exp(logits - top[..., None]), axis=-1))

    def posterior_means(self, x, alpha, sigma):
        """``E[n | x_t]`` and ``E[x0 | x_t]`` for ``x_t = alpha x0 + sigma n``."""
        r, diff, var = self.responsibilities(x, alpha, sigma)
        r_over_var = r / var
        # sum_k r_k (x - alpha mu_k) / v_k
        weighted = np.einsum("...k,...kd->...d", r_over_var, diff)
        noise = sigma * weighted
        x0 = (
            np.einsum("...k,kd->...d", r, self.means)
            + alpha * np.einsum("...k,...kd->...d", r_over_var * self.scales**2, diff)
        )
        return noise, x0


@dataclass(frozen=True)
class GaussianMixtureModel:
    """Guided model whose branches are exact for Gaussian-mixture data."""

    mode: str
    cond_mixture: Mixture
    uncond_mixture: Mixture

    def __post_init__(self):
        if self.mode not in (EPSILON, VELOCITY):
            raise ValueError(f"mode must be {EPSILON!r} or {VELOCITY!r}")
        if self.cond_mixture.dim != self.uncond_mixture.dim:
            raise ValueError("conditional and unconditional mixtures differ in dimension")

    @property
    def dim(self) -> int:
        return self.cond_mixture.dim

    def _branch(self, mixture, x, t, schedule):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"state has dimension {x.shape[-1]}, model expects {self.dim}")
        if not schedule.contains(t):
            raise ValueError(f"t={t} outside schedule range [{schedule.t_min}, {schedule.t_max}]")
        alpha = float(schedule.alpha(t))
        sigma = float(schedule.sigma(t))
        noise, x0 = mixture.posterior_means(x, alpha, sigma)
        if self.mode == EPSILON:
            return noise
        return float(schedule.dsigma(t)) * noise + float(schedule.dalpha(t)) * x0

    def cond(self, x, t, schedule: NoiseSchedule):
        return self._branch(self.cond_mixture, x, t, schedule)

    def uncond(self, x, t, schedule: NoiseSchedule):
        return self._branch(self.uncond_mixture, x, t, schedule)

    def predict(self, x, t, schedule: NoiseSchedule) -> Prediction:
        return Prediction.from_branches(self.cond(x, t, schedule), self.uncond(x, t, schedule))

    def log_density(self, x, t, schedule: NoiseSchedule, branch: str = "cond"):
        """Log of the noised marginal ``p_t`` of one branch."""
        mixture = self.cond_mixture if branch == "cond" else self.uncond_mixture
        return mixture.log_density(x, float(schedule.alpha(t)), float(schedule.sigma(t)))


@dataclass(frozen=True)
class CallableModel:
    """Guided model backed by two plain functions ``fn(x, t) -> prediction``.

    Useful for degenerate test problems (constant predictions, scalar linear
    ODEs) that are not mixtures.
    """

    mode: str
    dim: int
    cond_fn: Callable
    uncond_fn: Callable

    def cond(self, x, t, schedule):
        return np.asarray(self.cond_fn(np.asarray(x, dtype=np.float64), t), dtype=np.float64)

    def uncond(self, x, t, schedule):
        return np.asarray(self.uncond_fn(np.asarray(x, dtype=np.float64), t), dtype=np.float64)

    def predict(self, x, t, schedule) -> Prediction:
        return Prediction.from_branches(self.cond(x, t, schedule), self.uncond(x, t, schedule))


class CountingModel:
    """Wraps a guided model and counts every branch evaluation.

    A call on a batch of states counts once, so ``calls`` is the number of
    function evaluations spent per trajectory.
    """

    def __init__(self, model):
        self.model = model
        self.calls = 0

    @property
    def mode(self):
        return self.model.mode

    @property
    def dim(self):
        return self.model.dim

    def cond(self, x, t, schedule):
        self.calls += 1
        return self.model.cond(x, t, schedule)

    def uncond(self, x, t, schedule):
        self.calls += 1
        return self.model.uncond(x, t, schedule)

    def predict(self, x, t, schedule) -> Prediction:
        return Prediction.from_branches(self.cond(x, t, schedule), self.uncond(x, t, schedule))


def predict(model, x, t, schedule: NoiseSchedule) -> Prediction:
    return model.predict(x, t, schedule)


def single_gaussian_model(
    mode: str = EPSILON,
    dim: int = 8,
    cond_mean=1.0,
    cond_scale: float = 0.7,
    uncond_mean=0.0,
    uncond_scale: float = 1.0,
) -> GaussianMixtureModel:
    """One Gaussian per branch; the guided ODE is affine in ``x``."""
    cond = Mixture([1.0], [np.broadcast_to(np.asarray(cond_mean, dtype=np.float64), (dim,))], [cond_scale])
    uncond = Mixture([1.0], [np.broadcast_to(np.asarray(uncond_mean, dtype=np.float64), (dim,))], [uncond_scale])
    return GaussianMixtureModel(mode, cond, uncond)


def two_mode_model(
    mode: str = EPSILON,
    dim: int = 8,
    separation: float = 3.0,
    scale: float = 0.5,
    cond_weight: float = 0.8,
) -> GaussianMixtureModel:
    """Two modes at ``+-separation`` along the diagonal direction.

    The unconditional branch weights the modes equally; the condition favours
    the positive mode with probability ``cond_weight``. Guidance then acts as
    mode selection and its difference term is non-affine in ``x``.
    """
    u = np.full(dim, separation / np.sqrt(dim))
    means = np.stack([u, -u])
    cond = Mixture([cond_weight, 1.0 - cond_weight], means, [scale, scale])
    uncond = Mixture([0.5, 0.5], means, [scale, scale])
    return GaussianMixtureModel(mode, cond, uncond)
