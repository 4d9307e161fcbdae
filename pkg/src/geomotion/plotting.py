"""Deterministic SVG views of the learned latent space.

No raster/image dependencies: the scalar background (predictive variance or
magnification factor) is written as a grid of colored rects, overlaid with the
encoded training set, optional geodesics and obstacle projections. Identical
inputs produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geodesic import GeodesicGraph
from .metric import magnification_factor_batch
from .nets import rbf_forward
from .types import Obstacle
from .vae import ManifoldModel

PLOT_MODES = ("variance", "magnification")

# Coarse viridis-like ramp; linear interpolation between anchors.
_RAMP = np.array(
    [
        [68, 1, 84],
        [59, 82, 139],
        [33, 145, 140],
        [94, 201, 98],
        [253, 231, 37],
    ],
    dtype=np.float64,
)


def sample_field(model: ManifoldModel, mode: str, coords: np.ndarray) -> np.ndarray:
    """The scalar field a plot rasterizes: mean predictive position std for
    'variance', log sqrt(det M) for 'magnification'."""
    coords = np.atleast_2d(coords)
    if mode == "variance":
        prec = rbf_forward(model.position_precision, coords)
        return np.mean(prec**-0.5, axis=1)
    if mode == "magnification":
        return magnification_factor_batch(model, coords)
    raise ValueError(f"unknown plot mode {mode!r}; expected one of {PLOT_MODES}")


def _color(value: float) -> str:
    x = min(max(value, 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(x), len(_RAMP) - 2)
    frac = x - i
    rgb = (1.0 - frac) * _RAMP[i] + frac * _RAMP[i + 1]
    return "#{:02x}{:02x}{:02x}".format(*(int(round(c)) for c in rgb))


def _fmt(v: float) -> str:
    return format(v, ".3f")


def plot_latent(
    model: ManifoldModel,
    out_path: str | Path,
    mode: str = "magnification",
    graph: GeodesicGraph | None = None,
    geodesics: list[np.ndarray] | tuple[np.ndarray, ...] = (),
    obstacles: list[Obstacle] | tuple[Obstacle, ...] = (),
    resolution: int = 100,
    size: int = 640,
    margin: float = 0.15,
) -> bytes:
    """Render the latent field to an SVG file and return its bytes."""
    if graph is not None:
        lo, hi = graph.bbox_min, graph.bbox_max
    else:
        lo, hi = model.latent_bbox()
        extent = np.maximum(hi - lo, 1e-9)
        lo = lo - margin * extent
        hi = hi + margin * extent
    span = np.maximum(hi - lo, 1e-12)

    def to_px(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        x = (pts[:, 0] - lo[0]) / span[0] * size
        y = (1.0 - (pts[:, 1] - lo[1]) / span[1]) * size
        return np.stack([x, y], axis=1)

    axes = [np.linspace(lo[k] + 0.5 * span[k] / resolution, hi[k] - 0.5 * span[k] / resolution, resolution) for k in range(2)]
    g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
    centers = np.stack([g0.ravel(), g1.ravel()], axis=1)
    field = sample_field(model, mode, centers)
    f_lo, f_hi = float(field.min()), float(field.max())
    normalized = (field - f_lo) / (f_hi - f_lo) if f_hi > f_lo else np.zeros_like(field)

    cell = size / resolution
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f"<!-- mode={mode} field_min={f_lo!r} field_max={f_hi!r} -->",
    ]
    for idx, value in enumerate(normalized):
        i, j = divmod(idx, resolution)
        x = i * cell
        y = size - (j + 1) * cell
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell + 0.5)}" height="{_fmt(cell + 0.5)}" '
            f'fill="{_color(float(value))}"/>'
        )

    if model.training_latents is not None:
        for px, py in to_px(model.training_latents):
            parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="1.6" fill="#ffffff" fill-opacity="0.35"/>')

    if obstacles and graph is not None:
        for obs in obstacles:
            near = np.linalg.norm(graph.node_positions - obs.center, axis=1) <= obs.radius
            for px, py in to_px(graph.node_coords[near]):
                parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="{_fmt(cell)}" fill="#d62728" fill-opacity="0.25"/>')

    for curve in geodesics:
        pts = to_px(np.asarray(curve))
        coords = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="#ffd700" stroke-width="2.0"/>')

    parts.append("</svg>")
    data = ("\n".join(parts) + "\n").encode()
    Path(out_path).write_bytes(data)
    return data
