"""Discrete variance-preserving (DDPM) noise schedule.

Timesteps are 1-based: ``t = 1 .. T``.  Index 0 of the extended tables is the
clean-data boundary with ``alpha_bar = 1``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidScheduleError, InvalidStepError


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)
    # length T + 1, alpha_bars_ext[0] == 1
    alpha_bars_ext: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise InvalidScheduleError("betas must be a non-empty 1-D array")
        if np.any(betas <= 0) or np.any(betas >= 1) or not np.all(np.isfinite(betas)):
            raise InvalidScheduleError("every beta must lie in (0, 1)")
        alphas = 1.0 - betas
        alpha_bars = np.cumprod(alphas)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", alpha_bars)
        object.__setattr__(self, "alpha_bars_ext", np.concatenate([[1.0], alpha_bars]))

    @property
    def T(self) -> int:
        return self.betas.size

    def check_step(self, t: int, *, allow_zero: bool = False) -> int:
        lo = 0 if allow_zero else 1
        if int(t) != t or not lo <= t <= self.T:
            raise InvalidStepError(f"step {t} outside [{lo}, {self.T}]")
        return int(t)

    def beta(self, t: int) -> float:
        return float(self.betas[self.check_step(t) - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self.check_step(t) - 1])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars_ext[self.check_step(t, allow_zero=True)])

    def fingerprint(self) -> str:
        """SHA-256 of the beta table; stored in checkpoints."""
        return hashlib.sha256(np.ascontiguousarray(self.betas, dtype="<f8").tobytes()).hexdigest()


def linear_beta_schedule(T: int = 100, beta_min: float = 1e-4, beta_max: float = 0.02) -> NoiseSchedule:
    if int(T) != T or T < 1:
        raise InvalidScheduleError(f"T must be a positive integer, got {T}")
    if not 0 < beta_min <= beta_max < 1:
        raise InvalidScheduleError(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
    return NoiseSchedule(np.linspace(beta_min, beta_max, int(T)))


def forward_diffuse(x0, t: int, eps, sched: NoiseSchedule) -> np.ndarray:
    """``z_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps``; works on batches."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape[-1] != eps.shape[-1]:
        raise ValueError(f"dimension mismatch: {x0.shape} vs {eps.shape}")
    ab = sched.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def _noise_scale(t: int, sched: NoiseSchedule) -> float:
    ab = sched.alpha_bar(t)
    if ab >= 1.0:
        raise InvalidStepError(f"step {t} has no noise; the score is undefined there")
    return float(np.sqrt(1.0 - ab))


def eps_to_score(eps_hat, t: int, sched: NoiseSchedule) -> np.ndarray:
    return -np.asarray(eps_hat, dtype=np.float64) / _noise_scale(t, sched)


def score_to_eps(score, t: int, sched: NoiseSchedule) -> np.ndarray:
    return -np.asarray(score, dtype=np.float64) * _noise_scale(t, sched)
