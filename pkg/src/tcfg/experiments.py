"""Desk-scale experiments built from the pipeline pieces.

* ``geometry_experiment``: singular spectra and singular-vector alignment of
  exact scores sampled around one point of the two moons embedded in R^D.
* ``trajectory_experiment``: tangent/normal ratio of exact unconditional
  scores along guided sampling trajectories.
* ``compare_modes``: train a model per seed and score every guidance mode by
  distance to the moons and Frechet distance to the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import AlignmentReport, SpectrumReport, alignment_curves, normal_tangent_ratio, spectral_gap_index
from .dataset import NULL_LABEL, LabeledPoints, TwoMoonsSpec, embed_isometric, isometric_embedding, moon_point, two_moons
from .errors import InvalidInputError
from .evaluation import EvalReport, evaluate_samples
from .guidance import GuidanceConfig, GuidanceMode
from .linalg import svd_thin
from .model import Architecture, ScoreModel, TrainConfig, train
from .sampler import AnalyticSource, ModelSource, SampleResult, sample
from .schedule import NoiseSchedule, eps_to_score


@dataclass(frozen=True)
class GeometryConfig:
    ambient_dim: int = 10
    points_per_arc: int = 4000
    n_samples: int = 2000
    timesteps: tuple[int, ...] = (1, 10, 30, 50)
    anchor_theta: float = math.pi / 2
    anchor_label: int = 0
    seed: int = 0

    def validate(self, sched: NoiseSchedule) -> None:
        if self.ambient_dim < 3:
            raise InvalidInputError("ambient_dim must be at least 3")
        if self.n_samples < self.ambient_dim:
            raise InvalidInputError("need at least ambient_dim score samples")
        if self.anchor_label not in (0, 1):
            raise InvalidInputError("anchor_label must be 0 or 1")
        if not 0.0 <= self.anchor_theta <= math.pi:
            raise InvalidInputError("anchor_theta must lie in [0, pi]")
        for t in self.timesteps:
            sched.check_step(t)


def embedded_moons(ambient_dim: int, points_per_arc: int, seed: int) -> LabeledPoints:
    """Noise-free two moons mapped isometrically into R^ambient_dim."""
    flat = two_moons(TwoMoonsSpec(2 * points_per_arc, noise_std=0.0, seed=seed))
    return LabeledPoints(embed_isometric(flat.positions, ambient_dim, seed), flat.labels)


def local_score_matrices(data: LabeledPoints, anchor, label: int, t: int, n: int, sched: NoiseSchedule, rng):
    """Exact unconditional and conditional scores at ``n`` noisy copies of ``anchor``.

    Latents are ``sqrt(ab_t) anchor + sqrt(1 - ab_t) eps``, which concentrates
    the samples around one point of the noised manifold.
    """
    ab = sched.alpha_bar(t)
    Z = np.sqrt(ab) * np.asarray(anchor) + np.sqrt(1.0 - ab) * rng.standard_normal((n, data.dim))
    src = AnalyticSource(data, sched)
    U = eps_to_score(src.eps(Z, t, NULL_LABEL), t, sched)
    C = eps_to_score(src.eps(Z, t, label), t, sched)
    return U, C


def geometry_experiment(config: GeometryConfig, sched: NoiseSchedule) -> tuple[SpectrumReport, AlignmentReport]:
    config.validate(sched)
    data = embedded_moons(config.ambient_dim, config.points_per_arc, config.seed)
    embed = isometric_embedding(config.ambient_dim, config.seed)
    anchor = embed @ moon_point(config.anchor_theta, config.anchor_label)
    spectrum = SpectrumReport([], [], [], config.n_samples, config.ambient_dim)
    alignment = AlignmentReport([], [], [])
    for t in config.timesteps:
        rng = np.random.default_rng([config.seed, t])
        U, C = local_score_matrices(data, anchor, config.anchor_label, t, config.n_samples, sched, rng)
        su, sc = svd_thin(U), svd_thin(C)
        gap_u = spectral_gap_index(su.singular_values)
        spectrum.timesteps.append(t)
        spectrum.uncond.append(su.singular_values)
        spectrum.cond.append(sc.singular_values)
        spectrum.uncond_gap.append(gap_u)
        spectrum.cond_gap.append(spectral_gap_index(sc.singular_values))
        alignment.timesteps.append(t)
        alignment.indexed.append(alignment_curves(su.right_vectors, sc.right_vectors, "indexed"))
        alignment.greedy.append(alignment_curves(su.right_vectors, sc.right_vectors, "greedy"))
        alignment.gap_index.append(gap_u)
    return spectrum, alignment


def leading_alignment_wins(alignment: AlignmentReport) -> list[bool]:
    """Per timestep: does the mean |cos| up to the gap index beat the mean past it?"""
    wins = []
    for values, gap in zip(alignment.indexed, alignment.gap_index):
        if gap is None or gap >= len(values):
            wins.append(False)
            continue
        wins.append(bool(values[:gap].mean() > values[gap:].mean()))
    return wins


@dataclass(frozen=True)
class TrajectoryConfig:
    n_samples: int = 200
    points_per_arc: int = 2000
    label: int = 0
    mode: GuidanceMode = GuidanceMode.CFG
    scale: float = 2.0
    seed: int = 0


@dataclass
class TrajectoryReport:
    steps: list[int]
    median_ratio: np.ndarray
    ratios: np.ndarray  # (steps, samples)
    result: SampleResult = field(repr=False)

    def ratio_at(self, t: int) -> float:
        return float(self.median_ratio[self.steps.index(t)])

    def to_json(self) -> dict:
        return {
            "kind": "trajectory",
            "steps": list(self.steps),
            "median_ratio": [float(v) for v in self.median_ratio],
        }

    def rows(self):
        for t, v in zip(self.steps, self.median_ratio):
            yield t, "median_tangent_normal_ratio", 1, float(v)


def trajectory_experiment(config: TrajectoryConfig, sched: NoiseSchedule) -> TrajectoryReport:
    """Median ``|tangent| / |normal|`` of the exact unconditional score at every step."""
    data = two_moons(TwoMoonsSpec(2 * config.points_per_arc, noise_std=0.0, seed=config.seed))
    guidance = GuidanceConfig(config.mode, config.scale)
    result = sample(AnalyticSource(data, sched), guidance, config.label, config.n_samples, sched, config.seed,
                    record=True)
    steps = list(range(sched.T, 0, -1))
    ratios = np.empty((len(steps), config.n_samples))
    for j, tr in enumerate(result.trajectories):
        for k, t in enumerate(steps):
            ratios[k, j] = normal_tangent_ratio(tr.uncond_scores[tr.step_index(t)], tr.state_at(t))
    return TrajectoryReport(steps, np.median(ratios, axis=1), ratios, result)


@dataclass(frozen=True)
class CompareConfig:
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    n_samples: int = 500
    scale: float = 2.0
    modes: tuple[GuidanceMode, ...] = tuple(GuidanceMode)
    data: TwoMoonsSpec = TwoMoonsSpec()
    train: TrainConfig = TrainConfig()
    arch: Architecture = Architecture()


def train_for_seed(config: CompareConfig, seed: int, sched: NoiseSchedule) -> tuple[ScoreModel, LabeledPoints]:
    data = two_moons(TwoMoonsSpec(config.data.n_samples, config.data.noise_std, seed))
    model = ScoreModel.initialize(config.arch, seed)
    tc = TrainConfig(**{**config.train.__dict__, "seed": seed})
    train(model, data, sched, tc)
    return model, data


def sample_both_labels(source, guidance: GuidanceConfig, n: int, sched: NoiseSchedule, seed: int) -> np.ndarray:
    """``n`` samples split evenly between the two labels (label 0 gets the odd one)."""
    n0 = (n + 1) // 2
    parts = [sample(source, guidance, 0, n0, sched, seed).samples]
    if n - n0:
        parts.append(sample(source, guidance, 1, n - n0, sched, seed).samples)
    return np.concatenate(parts)


def compare_modes(config: CompareConfig, sched: NoiseSchedule, models=None) -> tuple[EvalReport, dict]:
    """Return the report and the samples keyed by ``(seed, mode)``.

    ``models`` optionally maps seed to a trained ``(model, data)`` pair.
    """
    report = EvalReport()
    samples = {}
    for seed in config.seeds:
        model, data = models[seed] if models and seed in models else train_for_seed(config, seed, sched)
        source = ModelSource(model)
        for mode in config.modes:
            X = sample_both_labels(source, GuidanceConfig(mode, config.scale), config.n_samples, sched, seed)
            samples[(seed, GuidanceMode(mode).value)] = X
            report.modes.append(evaluate_samples(X, data.positions, GuidanceMode(mode).value, seed))
    return report, samples


def ordering_counts(report: EvalReport) -> dict[str, int]:
    """Seeds where TCFG <= CFG, and where CFG and TCFG both beat CondOnly (median distance)."""
    by_seed: dict[int, dict[str, float]] = {}
    for m in report.modes:
        by_seed.setdefault(m.seed, {})[m.mode] = m.median_distance
    tcfg_le_cfg = beat_cond = 0
    for vals in by_seed.values():
        cfg, tcfg, cond = vals["cfg"], vals["tcfg"], vals["cond"]
        tcfg_le_cfg += tcfg <= cfg
        beat_cond += cfg < cond and tcfg < cond
    return {"seeds": len(by_seed), "tcfg_le_cfg": tcfg_le_cfg, "both_beat_cond": beat_cond}
