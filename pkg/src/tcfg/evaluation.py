"""Sample-quality metrics and the guidance overhead micro-benchmark."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import NULL_LABEL, moons_distance
from .errors import InvalidInputError
from .guidance import GuidanceConfig, GuidanceMode, guide_batch
from .linalg import spd_sqrt_2x2
from .sampler import ddpm_step, sample_noise
from .schedule import NoiseSchedule

COV_JITTER = 1e-10


def mean_manifold_distance(samples) -> tuple[float, float]:
    """Mean and median distance from each sample to the nearest moon arc."""
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if X.size == 0:
        raise InvalidInputError("no samples")
    d = moons_distance(X)
    return float(d.mean()), float(np.median(d))


@dataclass(frozen=True)
class FrechetResult:
    distance: float
    regularized: bool


def _moments(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2 or X.shape[0] < 3:
        raise InvalidInputError("each set needs at least 3 two-dimensional samples")
    mu = X.mean(axis=0)
    cov = np.cov(X, rowvar=False)
    cov = 0.5 * (cov + cov.T)
    scale = max(float(np.trace(cov)), np.finfo(float).tiny)
    degenerate = float(np.linalg.det(cov)) <= (1e-12 * scale) ** 2
    if degenerate:
        cov = cov + COV_JITTER * np.eye(2)
    return mu, cov, degenerate


def frechet_gaussian_2d(set_a, set_b) -> FrechetResult:
    """Frechet distance between Gaussians fitted to two 2-D sample sets.

    The cross term uses ``tr (S_a^1/2 S_b S_a^1/2)^1/2``, which equals
    ``tr (S_a S_b)^1/2`` but only needs square roots of symmetric matrices.
    """
    mu_a, cov_a, reg_a = _moments(set_a)
    mu_b, cov_b, reg_b = _moments(set_b)
    ra = spd_sqrt_2x2(cov_a)
    mid = ra @ cov_b @ ra
    cross = np.trace(spd_sqrt_2x2(0.5 * (mid + mid.T)))
    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * cross)
    return FrechetResult(max(value, 0.0), reg_a or reg_b)


@dataclass
class ModeMetrics:
    mode: str
    mean_distance: float
    median_distance: float
    frechet: float
    frechet_regularized: bool
    n_samples: int
    seed: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BenchReport:
    cfg_step_median: float
    tcfg_step_median: float
    overhead_fraction: float
    cfg_guidance_median: float
    tcfg_guidance_median: float
    n_samples: int
    steps: int
    repeats: int
    seed: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EvalReport:
    modes: list[ModeMetrics] = field(default_factory=list)
    bench: BenchReport | None = None

    def to_json(self) -> dict:
        return {
            "modes": [m.to_json() for m in self.modes],
            "bench": None if self.bench is None else self.bench.to_json(),
        }

    def write(self, json_path, csv_path) -> None:
        Path(json_path).write_text(json.dumps(self.to_json(), indent=1) + "\n")
        with Path(csv_path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "mode", "n_samples", "mean_distance", "median_distance", "frechet", "regularized"])
            for m in self.modes:
                w.writerow([m.seed, m.mode, m.n_samples, repr(m.mean_distance), repr(m.median_distance),
                            repr(m.frechet), int(m.frechet_regularized)])


def evaluate_samples(samples, reference, mode: str, seed: int) -> ModeMetrics:
    mean, median = mean_manifold_distance(samples)
    fd = frechet_gaussian_2d(samples, reference)
    return ModeMetrics(str(mode), mean, median, fd.distance, fd.regularized, int(len(samples)), seed)


def bench_overhead(
    source,
    sched: NoiseSchedule,
    n: int = 500,
    seed: int = 0,
    scale: float = 2.0,
    label: int = 0,
    repeats: int = 3,
    dim: int = 2,
) -> BenchReport:
    """Per-step wall-clock medians of CFG and TCFG sampling on identical noise.

    Each step of both samplers is timed in alternation so that machine noise
    hits the two modes alike.  The guidance combination alone is timed too.
    """
    if n < 1 or repeats < 1:
        raise InvalidInputError("n and repeats must be positive")
    modes = (GuidanceConfig(GuidanceMode.CFG, scale), GuidanceConfig(GuidanceMode.TCFG, scale))
    noise = np.stack([sample_noise(seed, i, sched.T, dim) for i in range(n)])
    step_times = ([], [])
    guide_times = ([], [])
    clock = time.perf_counter
    for _ in range(repeats):
        Z = [noise[:, 0, :].copy(), noise[:, 0, :].copy()]
        for t in range(sched.T, 0, -1):
            for k, cfg in enumerate(modes):
                t0 = clock()
                ec = source.eps(Z[k], t, label)
                eu = source.eps(Z[k], t, NULL_LABEL)
                g0 = clock()
                g = guide_batch(eu, ec, cfg)
                g1 = clock()
                Z[k] = ddpm_step(Z[k], g, t, sched, noise=noise[:, sched.T - t + 1, :])
                t1 = clock()
                step_times[k].append(t1 - t0)
                guide_times[k].append(g1 - g0)
    cfg_med, tcfg_med = (float(np.median(s)) for s in step_times)
    return BenchReport(
        cfg_step_median=cfg_med,
        tcfg_step_median=tcfg_med,
        overhead_fraction=(tcfg_med - cfg_med) / cfg_med,
        cfg_guidance_median=float(np.median(guide_times[0])),
        tcfg_guidance_median=float(np.median(guide_times[1])),
        n_samples=n,
        steps=sched.T,
        repeats=repeats,
        seed=seed,
    )
