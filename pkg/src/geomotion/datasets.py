"""Synthetic demonstration generators.

Two stand-in datasets: a planar J-shape with C-shaped orientations on S^2
(R^2 x S^2), and a three-branch grasp-and-pour scenario in R^3 x S^3 whose
branches cross in a shared mid-workspace region. Both are fully deterministic
under a seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .types import Demonstration, Pose

# Control polygon of the J letterform (unit-ish frame, height > width).
TOY_J_WAYPOINTS = np.array(
    [
        [0.45, 1.00],
        [0.45, 0.45],
        [0.45, -0.10],
        [0.42, -0.45],
        [0.30, -0.75],
        [0.05, -0.90],
        [-0.20, -0.85],
        [-0.38, -0.65],
        [-0.45, -0.40],
    ]
)

# C-shaped arc on S^2: fixed colatitude, azimuth sweep leaving a gap.
TOY_C_COLATITUDE = np.deg2rad(55.0)
TOY_C_AZIMUTH_SPAN = (np.deg2rad(40.0), np.deg2rad(320.0))

TOY_SCALE = 0.15
TOY_CENTER = np.array([0.40, 0.0])


@dataclass
class Dataset:
    kind: str
    n: int
    m: int
    units: str
    provenance: str
    demonstrations: list[Demonstration] = field(default_factory=list)

    def all_poses(self) -> list[Pose]:
        return [p for demo in self.demonstrations for p in demo.poses]

    def position_array(self) -> np.ndarray:
        return np.concatenate([np.stack([p.position for p in d.poses]) for d in self.demonstrations])


def _arclength_resample(waypoints: np.ndarray, count: int) -> np.ndarray:
    """Smooth curve through waypoints, resampled ~uniformly in arc length."""
    chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(waypoints, axis=0), axis=1))])
    spline = CubicSpline(chord / chord[-1], waypoints, axis=0)
    dense = spline(np.linspace(0.0, 1.0, 40 * len(waypoints)))
    seg = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, arc[-1], count)
    params = np.interp(targets, arc, np.linspace(0.0, 1.0, len(dense)))
    return spline(params)


def _sphere_tangent_noise(points: np.ndarray, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Perturb unit vectors within their tangent planes, then renormalize."""
    noise = rng.normal(0.0, scale, size=points.shape)
    noise -= points * np.sum(noise * points, axis=1, keepdims=True)
    out = points + noise
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def gen_toy_jc(samples: int = 120, noise_std: float = 0.005, seed: int = 0, demos: int = 4) -> Dataset:
    """J-shaped positions in R^2 paired with a C-shaped arc on S^2."""
    if samples < 10:
        raise ValueError("toy generator needs at least 10 samples per demonstration")
    rng = np.random.default_rng(seed)
    base_positions = TOY_CENTER + TOY_SCALE * _arclength_resample(TOY_J_WAYPOINTS, samples)
    phi = np.linspace(TOY_C_AZIMUTH_SPAN[0], TOY_C_AZIMUTH_SPAN[1], samples)
    sin_t = np.sin(TOY_C_COLATITUDE)
    base_orientations = np.stack(
        [sin_t * np.cos(phi), sin_t * np.sin(phi), np.full(samples, np.cos(TOY_C_COLATITUDE))], axis=1
    )

    demonstrations = []
    timestamps = np.linspace(0.0, 5.0, samples)
    for k in range(demos):
        positions = base_positions + rng.normal(0.0, noise_std, size=base_positions.shape)
        orientations = _sphere_tangent_noise(base_orientations, noise_std, rng)
        poses = tuple(Pose(p, q) for p, q in zip(positions, orientations))
        demonstrations.append(Demonstration(id=f"jc-{k:03d}", timestamps=timestamps, poses=poses))
    return Dataset(
        kind="toy-jc",
        n=2,
        m=2,
        units="meters",
        provenance=f"synthetic toy-jc seed={seed} samples={samples} demos={demos} noise={noise_std}",
        demonstrations=demonstrations,
    )


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def _quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def _slerp(q0: np.ndarray, q1: np.ndarray, t: np.ndarray) -> np.ndarray:
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1, dot = -q1, -dot
    dot = min(dot, 1.0)
    theta = np.arccos(dot)
    if theta < 1e-9:
        out = q0[None, :] + t[:, None] * (q1 - q0)[None, :]
    else:
        out = (np.sin((1.0 - t) * theta)[:, None] * q0 + np.sin(t * theta)[:, None] * q1) / np.sin(theta)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


# Per-branch waypoints: can grasp -> lift -> shared crossing region -> cup.
def _pouring_waypoints(branch: int) -> np.ndarray:
    b = branch
    return np.array(
        [
            [0.62, -0.28 + 0.28 * b, 0.06],
            [0.55, -0.22 + 0.24 * b, 0.22],
            [0.42, 0.006 * (b - 1), 0.30],
            [0.30, -0.18 + 0.19 * b, 0.26],
            [0.24, -0.20 + 0.20 * b, 0.14],
        ]
    )


_POURING_ROTATION_DEG = (86.0, 90.0, 94.0)


def gen_pouring(branches: int = 3, samples: int = 90, seed: int = 0, demos_per_branch: int = 3, noise_std: float = 0.004) -> Dataset:
    """Three demonstration families in R^3 x S^3 that cross mid-workspace.

    Each branch interpolates roughly a 90-degree end-effector rotation from
    grasp to pour; every sample carries its branch label.
    """
    if branches < 2 or branches > 3:
        raise ValueError("pouring generator supports 2 or 3 branches")
    if samples < 10:
        raise ValueError("pouring generator needs at least 10 samples per demonstration")
    rng = np.random.default_rng(seed)
    q_start = np.array([0.0, 1.0, 0.0, 0.0])  # gripper-down reference

    demonstrations = []
    timestamps = np.linspace(0.0, 8.0, samples)
    for b in range(branches):
        base_positions = _arclength_resample(_pouring_waypoints(b), samples)
        axis = np.array([0.1 * (b - 1), 1.0, 0.0])
        q_end = _quat_mul(q_start, _quat_from_axis_angle(axis, np.deg2rad(_POURING_ROTATION_DEG[b])))
        base_orientations = _slerp(q_start, q_end, np.linspace(0.0, 1.0, samples))
        for k in range(demos_per_branch):
            positions = base_positions + rng.normal(0.0, noise_std, size=base_positions.shape)
            orientations = _sphere_tangent_noise(base_orientations, noise_std, rng)
            poses = tuple(Pose(p, q) for p, q in zip(positions, orientations))
            demonstrations.append(
                Demonstration(
                    id=f"pour-b{b}-{k:03d}",
                    timestamps=timestamps,
                    poses=poses,
                    labels=tuple(b for _ in range(samples)),
                )
            )
    return Dataset(
        kind="pouring",
        n=3,
        m=3,
        units="meters",
        provenance=(
            f"synthetic pouring seed={seed} branches={branches} samples={samples} "
            f"demos_per_branch={demos_per_branch} noise={noise_std}"
        ),
        demonstrations=demonstrations,
    )
