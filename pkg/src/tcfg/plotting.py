"""Minimal deterministic SVG plots (scatter, multi-line, trajectory overlay)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidInputError

PLOT_KINDS = ("scatter", "multi-line", "trajectory-overlay")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT = 480, 360
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 56, 120, 28, 44


@dataclass
class Series:
    """``style`` is ``"markers"`` (one circle per point) or ``"line"`` (one polyline)."""

    label: str
    points: np.ndarray
    style: str = "markers"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError(f"series {self.label!r} has non-finite coordinates")
        if self.style not in ("markers", "line"):
            raise InvalidInputError(f"unknown series style {self.style!r}")
        self.points = pts


@dataclass
class PlotSpec:
    kind: str
    path: Path
    series: list[Series] = field(default_factory=list)
    x_label: str = "x"
    y_label: str = "y"
    title: str = ""
    equal_aspect: bool = False

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise InvalidInputError(f"unknown plot kind {self.kind!r}")
        self.path = Path(self.path)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _bounds(spec: PlotSpec):
    pts = [s.points for s in spec.series if s.points.size]
    if not pts:
        return 0.0, 1.0, 0.0, 1.0
    allp = np.concatenate(pts)
    x0, y0 = allp.min(axis=0)
    x1, y1 = allp.max(axis=0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    if spec.equal_aspect:
        pw = WIDTH - MARGIN_L - MARGIN_R
        ph = HEIGHT - MARGIN_T - MARGIN_B
        unit = max((x1 - x0) / pw, (y1 - y0) / ph)
        cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
        x0, x1 = cx - unit * pw / 2, cx + unit * pw / 2
        y0, y1 = cy - unit * ph / 2, cy + unit * ph / 2
    return float(x0), float(x1), float(y0), float(y1)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def render_svg(spec: PlotSpec) -> str:
    x0, x1, y0, y1 = _bounds(spec)
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN_T + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<g class="axes" stroke="black" stroke-width="1" fill="none">'
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T + ph}" x2="{MARGIN_L + pw}" y2="{MARGIN_T + ph}"/>'
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{MARGIN_T + ph}"/></g>',
    ]
    text = '<text x="{}" y="{}" font-family="sans-serif" font-size="{}" text-anchor="{}">{}</text>'
    for v in _ticks(x0, x1):
        out.append(text.format(_fmt(sx(v)), MARGIN_T + ph + 14, 10, "middle", f"{v:.3g}"))
    for v in _ticks(y0, y1):
        out.append(text.format(MARGIN_L - 4, _fmt(sy(v) + 3), 10, "end", f"{v:.3g}"))
    out.append(text.format(_fmt(MARGIN_L + pw / 2), HEIGHT - 8, 12, "middle", escape(spec.x_label)))
    out.append(text.format(12, _fmt(MARGIN_T + ph / 2), 12, "middle", escape(spec.y_label)))
    if spec.title:
        out.append(text.format(_fmt(MARGIN_L + pw / 2), 16, 13, "middle", escape(spec.title)))

    for k, s in enumerate(spec.series):
        color = PALETTE[k % len(PALETTE)]
        if s.style == "line":
            if s.points.size:
                coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in s.points)
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{coords}"/>')
        else:
            out.append(f'<g fill="{color}" fill-opacity="0.6">')
            out.extend(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="1.8"/>' for x, y in s.points)
            out.append("</g>")
        ly = MARGIN_T + 8 + 16 * k
        lx = WIDTH - MARGIN_R + 10
        out.append(f'<rect x="{lx}" y="{ly - 5}" width="10" height="10" fill="{color}"/>')
        out.append(text.format(lx + 14, ly + 4, 10, "start", escape(s.label)))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(spec: PlotSpec) -> Path:
    svg = render_svg(spec)
    try:
        spec.path.write_text(svg)
    except OSError as exc:
        raise InvalidInputError(f"cannot write plot to {spec.path}: {exc}") from exc
    return spec.path


def log_spectrum_series(label: str, values) -> Series:
    """Singular values as a ``log10`` line over 1-based index (zeros are clipped)."""
    v = np.asarray(values, dtype=np.float64)
    tiny = max(float(v.max(initial=0.0)) * 1e-16, 1e-300)
    idx = np.arange(1, v.size + 1)
    return Series(label, np.column_stack([idx, np.log10(np.maximum(v, tiny))]), "line")
