"""Two-moons toy data, its analytic nearest-point projection, and isometric embedding.

Outer moon (label 0): ``(cos t, sin t)``; inner moon (label 1):
``(1 - cos t, 0.5 - sin t)``; ``t`` in ``[0, pi]``.  Both arcs are unit
half-circles, centred at ``(0, 0)`` and ``(1, 0.5)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import AmbiguousProjectionError, InvalidInputError, InvalidSpecError

NULL_LABEL = 2

# (center, orientation) per label: point(t) = center + orientation * (cos t, sin t)
ARCS = {
    0: (np.array([0.0, 0.0]), 1.0),
    1: (np.array([1.0, 0.5]), -1.0),
}


@dataclass(frozen=True)
class TwoMoonsSpec:
    n_samples: int = 10_000
    noise_std: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise InvalidSpecError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        if not math.isfinite(self.noise_std) or self.noise_std < 0:
            raise InvalidSpecError(f"noise_std must be finite and >= 0, got {self.noise_std}")
        if self.seed < 0:
            raise InvalidSpecError("seed must be non-negative")


@dataclass(frozen=True)
class LabeledPoint:
    position: np.ndarray
    label: int


@dataclass(frozen=True)
class LabeledPoints:
    """Column-stored labeled point set: ``positions`` is (n, D), ``labels`` is (n,)."""

    positions: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.positions.ndim != 2 or self.labels.shape != (self.positions.shape[0],):
            raise InvalidInputError("positions must be (n, D) with one label per row")

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __iter__(self) -> Iterator[LabeledPoint]:
        for x, y in zip(self.positions, self.labels):
            yield LabeledPoint(x, int(y))

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def with_label(self, label: int) -> np.ndarray:
        return self.positions[self.labels == label]


def moon_point(theta, label: int) -> np.ndarray:
    """Noise-free point(s) of the given moon at angle(s) ``theta``."""
    center, orient = ARCS[label]
    theta = np.asarray(theta, dtype=np.float64)
    return center + orient * np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def two_moons(spec: TwoMoonsSpec) -> LabeledPoints:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_outer = (spec.n_samples + 1) // 2
    n_inner = spec.n_samples // 2
    theta = rng.uniform(0.0, math.pi, size=n_outer + n_inner)
    positions = np.concatenate([moon_point(theta[:n_outer], 0), moon_point(theta[n_outer:], 1)])
    if spec.noise_std > 0:
        positions = positions + spec.noise_std * rng.standard_normal(positions.shape)
    labels = np.concatenate([np.zeros(n_outer, dtype=np.int64), np.ones(n_inner, dtype=np.int64)])
    return LabeledPoints(positions, labels)


@dataclass(frozen=True)
class ManifoldProjection:
    """Nearest point on a moon arc and the local frame there.

    ``normal`` is perpendicular to ``tangent`` and points from the query toward
    ``foot_point``.  For an interior foot point this is exactly
    ``(foot_point - query) / distance``; when the foot point is a clamped arc
    endpoint the offset is not perpendicular to the arc, and ``normal`` is the
    perpendicular with the same orientation.
    """

    foot_point: np.ndarray
    distance: float
    tangent: np.ndarray
    normal: np.ndarray
    label: int
    theta: float


@dataclass(frozen=True)
class MoonsProjection:
    nearest: ManifoldProjection
    per_arc: dict[int, ManifoldProjection]


def _arc_params(points: np.ndarray, label: int):
    """Clamped arc angle, foot points and distances for a batch of 2-D points."""
    center, orient = ARCS[label]
    q = orient * (points - center)
    radius = np.hypot(q[:, 0], q[:, 1])
    phi = np.arctan2(q[:, 1], q[:, 0])
    # Outside [0, pi] the nearest arc point is the angularly closer endpoint.
    theta = np.where(phi >= 0.0, phi, np.where(phi > -0.5 * math.pi, 0.0, math.pi))
    foot = moon_point(theta, label)
    dist = np.hypot(*(points - foot).T)
    return theta, foot, dist, radius


def _projection(p: np.ndarray, label: int, theta: float, foot: np.ndarray, dist: float) -> ManifoldProjection:
    _, orient = ARCS[label]
    tangent = orient * np.array([-math.sin(theta), math.cos(theta)])
    normal = np.array([-tangent[1], tangent[0]])
    offset = foot - p
    if dist > 0.0:
        if normal @ offset < 0:
            normal = -normal
    else:
        # On the arc: orient away from the circle's center.
        radial = orient * np.array([math.cos(theta), math.sin(theta)])
        if normal @ radial < 0:
            normal = -normal
    return ManifoldProjection(foot, float(dist), tangent, normal, label, float(theta))


def project_to_moons(p) -> MoonsProjection:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (2,) or not np.all(np.isfinite(p)):
        raise InvalidInputError(f"expected a finite 2-vector, got {p!r}")
    per_arc = {}
    for label in ARCS:
        theta, foot, dist, radius = _arc_params(p[None, :], label)
        if radius[0] == 0.0:
            raise AmbiguousProjectionError(f"{p.tolist()} is the center of moon {label}")
        per_arc[label] = _projection(p, label, float(theta[0]), foot[0], float(dist[0]))
    nearest = min(per_arc.values(), key=lambda proj: (proj.distance, proj.label))
    return MoonsProjection(nearest, per_arc)


def moons_distance(points) -> np.ndarray:
    """Vectorised distance from each 2-D point to the nearer moon arc."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    dists = []
    for label in ARCS:
        _, _, dist, radius = _arc_params(pts, label)
        if np.any(radius == 0.0):
            raise AmbiguousProjectionError(f"a point is the center of moon {label}")
        dists.append(dist)
    return np.minimum(*dists)


def isometric_embedding(ambient_dim: int, seed: int) -> np.ndarray:
    """Random (ambient_dim x 2) matrix with orthonormal columns."""
    if ambient_dim < 2:
        raise InvalidInputError(f"ambient_dim must be >= 2, got {ambient_dim}")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((ambient_dim, 2)))
    return Q * np.sign(np.diag(R))


def embed_isometric(points, ambient_dim: int, seed: int) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInputError(f"points must be (n, 2), got {pts.shape}")
    return pts @ isometric_embedding(ambient_dim, seed).T


def write_points_csv(path, data: LabeledPoints) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(data.dim)] + ["label"])
        for x, y in zip(data.positions, data.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])
    return path


def read_points_csv(path) -> LabeledPoints:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[-1] != "label":
        raise InvalidInputError(f"{path}: last column must be 'label'")
    positions = np.array([[float(v) for v in r[:-1]] for r in body], dtype=np.float64).reshape(len(body), len(header) - 1)
    labels = np.array([int(r[-1]) for r in body], dtype=np.int64)
    return LabeledPoints(positions, labels)
