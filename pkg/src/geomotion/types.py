"""Shared domain types: poses on R^n x S^m, demonstrations, latent points, obstacles.

All types are immutable value objects (frozen dataclasses over read-only numpy
arrays); they can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_NORM_TOL = 1e-9


def _as_readonly(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pose:
    """A point in R^n x S^m: position plus a unit vector orientation.

    For n = 3, m = 3 the orientation is a unit quaternion in scalar-first
    (w, x, y, z) order.
    """

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _as_readonly(self.position))
        object.__setattr__(self, "orientation", _as_readonly(self.orientation))
        if self.position.ndim != 1 or self.position.size < 1:
            raise ValueError("position must be a vector of length >= 1")
        if self.orientation.ndim != 1 or self.orientation.size < 2:
            raise ValueError("orientation must be a vector of length >= 2")
        if not np.all(np.isfinite(self.position)) or not np.all(np.isfinite(self.orientation)):
            raise ValueError("pose entries must be finite")
        norm = float(np.linalg.norm(self.orientation))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"orientation norm {norm!r} is not unit (tolerance {UNIT_NORM_TOL})")

    @property
    def n(self) -> int:
        return self.position.size

    @property
    def m(self) -> int:
        return self.orientation.size - 1

    def ambient(self) -> np.ndarray:
        """Concatenated (n + m + 1)-vector, position first."""
        return np.concatenate([self.position, self.orientation])

    def negated_orientation(self) -> "Pose":
        return Pose(self.position, -self.orientation)


@dataclass(frozen=True)
class Demonstration:
    """One recorded trajectory: strictly increasing timestamps with poses."""

    id: str
    timestamps: np.ndarray
    poses: tuple[Pose, ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _as_readonly(self.timestamps))
        object.__setattr__(self, "poses", tuple(self.poses))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(int(b) for b in self.labels))
        if len(self.poses) == 0:
            raise ValueError(f"demonstration {self.id!r} has no samples")
        if self.timestamps.shape != (len(self.poses),):
            raise ValueError("timestamps and poses must have equal length")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError(f"demonstration {self.id!r} timestamps must be strictly increasing")
        n, m = self.poses[0].n, self.poses[0].m
        for p in self.poses:
            if p.n != n or p.m != m:
                raise ValueError(f"demonstration {self.id!r} mixes pose dimensions")
        if self.labels is not None and len(self.labels) != len(self.poses):
            raise ValueError("labels must align with samples")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def n(self) -> int:
        return self.poses[0].n

    @property
    def m(self) -> int:
        return self.poses[0].m

    def ambient_array(self) -> np.ndarray:
        """(T, n + m + 1) array of samples in recorded order."""
        return np.stack([p.ambient() for p in self.poses])


@dataclass(frozen=True)
class LatentPoint:
    """A d-dimensional latent coordinate."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_readonly(self.coords))
        if self.coords.ndim != 1 or self.coords.size < 1:
            raise ValueError("latent coords must be a vector of length >= 1")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("latent coords must be finite")

    @property
    def d(self) -> int:
        return self.coords.size


@dataclass(frozen=True)
class Obstacle:
    """Spherical soft obstacle in position space.

    strength scales the cost bump, radius sets its spatial extent.
    """

    center: np.ndarray
    radius: float
    strength: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_readonly(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "strength", float(self.strength))
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")
        if self.strength <= 0:
            raise ValueError("obstacle strength must be positive")


@dataclass(frozen=True)
class Trajectory:
    """A generated motion: (t, pose) samples with t non-decreasing over [0, 1]."""

    parameters: np.ndarray
    poses: tuple[Pose, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "parameters", _as_readonly(self.parameters))
        object.__setattr__(self, "poses", tuple(self.poses))
        t = self.parameters
        if t.shape != (len(self.poses),) or len(self.poses) == 0:
            raise ValueError("parameters and poses must be non-empty and aligned")
        if np.any(np.diff(t) < 0):
            raise ValueError("trajectory parameter must be non-decreasing")
        if abs(t[0]) > 1e-12 or abs(t[-1] - 1.0) > 1e-12:
            if len(self.poses) > 1:
                raise ValueError("trajectory parameter must span [0, 1]")

    def __len__(self) -> int:
        return len(self.poses)

    def positions(self) -> np.ndarray:
        return np.stack([p.position for p in self.poses])

    def orientations(self) -> np.ndarray:
        return np.stack([p.orientation for p in self.poses])


def antipodal_double(demos: list[Demonstration]) -> list[Demonstration]:
    """Return the demonstrations plus a twin of each with all orientations negated.

    Positions and timestamps are untouched; output size is exactly 2x input.
    """
    if not demos:
        raise ValueError("no demonstrations")
    doubled = list(demos)
    for demo in demos:
        twins = tuple(p.negated_orientation() for p in demo.poses)
        doubled.append(
            Demonstration(
                id=demo.id + "/antipode",
                timestamps=demo.timestamps,
                poses=twins,
                labels=demo.labels,
            )
        )
    return doubled


def normalize_orientation(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project v onto the unit sphere and return (u, J).

    u = v / |v| and J = (I - u u^T) / |v| is the Jacobian of the projection,
    so J annihilates the radial direction: J v = 0.
    """
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= 1e-12:
        raise ValueError("degenerate quaternion: norm too close to zero")
    u = v / norm
    jac = (np.eye(v.size) - np.outer(u, u)) / norm
    return u, jac
