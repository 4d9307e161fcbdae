"""Ambient motion generation: decode latent splines and replan around moving obstacles."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .geodesic import GeodesicGraph, SplinePath, apply_obstacles, fit_spline, refine_spline, shortest_path
from .metric import AmbientMetricSpec
from .types import Obstacle, Pose, Trajectory
from .vae import ManifoldModel, decode_batch, encode


@dataclass
class PlanRequest:
    start: Pose
    goal: Pose
    obstacles: tuple[Obstacle, ...] = field(default_factory=tuple)
    samples: int = 100
    refine: bool = False
    refine_iterations: int = 25
    control_points: int = 16

    def __post_init__(self):
        self.obstacles = tuple(self.obstacles)
        if self.samples < 2:
            raise ValueError("a trajectory needs at least 2 samples")


@dataclass
class PlanRecord:
    """Latent-side diagnostics of one plan."""

    node_path: list[int]
    node_coords: np.ndarray
    spline: SplinePath
    graph_cost: float
    start_latent: np.ndarray
    goal_latent: np.ndarray


@dataclass
class ScriptEntry:
    tick: int
    obstacles: tuple[Obstacle, ...]


@dataclass
class ReplanScript:
    """Obstacle states over time; between entries the last state holds."""

    entries: list[ScriptEntry]
    rate_hz: float = 100.0
    total_ticks: int | None = None

    def __post_init__(self):
        ticks = [e.tick for e in self.entries]
        if any(t2 <= t1 for t1, t2 in zip(ticks, ticks[1:])):
            raise ValueError("script tick indices must be increasing")
        if self.rate_hz <= 0:
            raise ValueError("tick rate must be positive")
        if self.total_ticks is None:
            self.total_ticks = (ticks[-1] + 1) if ticks else 0

    def obstacles_at(self, tick: int) -> tuple[Obstacle, ...]:
        state: tuple[Obstacle, ...] = ()
        for entry in self.entries:
            if entry.tick > tick:
                break
            state = entry.obstacles
        return state


@dataclass
class TimingReport:
    tick_ms: list[float]
    budget_ms: float

    @property
    def median_ms(self) -> float:
        return float(np.median(self.tick_ms)) if self.tick_ms else 0.0

    @property
    def p95_ms(self) -> float:
        return float(np.percentile(self.tick_ms, 95)) if self.tick_ms else 0.0

    @property
    def over_budget_ticks(self) -> int:
        return int(sum(t > self.budget_ms for t in self.tick_ms))


def align_orientation_signs(orientations: np.ndarray) -> np.ndarray:
    """Flip signs so consecutive rows never have a negative dot product.

    The model itself stays antipodally symmetric; this only makes the decoded
    quaternion path continuous for downstream consumers.
    """
    out = orientations.copy()
    for i in range(1, len(out)):
        if np.dot(out[i - 1], out[i]) < 0.0:
            out[i] = -out[i]
    return out


def decode_trajectory(model: ManifoldModel, spline: SplinePath, samples: int = 100) -> Trajectory:
    """Sample the spline uniformly and decode mean poses, sign-aligned."""
    if samples < 2:
        raise ValueError("a trajectory needs at least 2 samples")
    t = np.linspace(0.0, 1.0, samples)
    positions, _, orientations, _ = decode_batch(model, spline(t))
    orientations = align_orientation_signs(orientations)
    poses = tuple(Pose(p, q) for p, q in zip(positions, orientations))
    return Trajectory(parameters=t, poses=poses)


def _constant_trajectory(model: ManifoldModel, coords: np.ndarray) -> Trajectory:
    positions, _, orientations, _ = decode_batch(model, coords[None, :])
    return Trajectory(parameters=np.array([0.0]), poses=(Pose(positions[0], orientations[0]),))


def plan(model: ManifoldModel, graph: GeodesicGraph, request: PlanRequest) -> tuple[Trajectory, PlanRecord]:
    """Full pipeline: encode endpoints, reweight, Dijkstra, spline, decode."""
    start_z, _ = encode(model, request.start)
    goal_z, _ = encode(model, request.goal)
    apply_obstacles(graph, request.obstacles)
    path, cost = shortest_path(graph, start_z, goal_z)
    node_coords = graph.node_coords[path]

    if len(path) == 1:
        spline = fit_spline(np.stack([start_z.coords, goal_z.coords]), 2)
        trajectory = _constant_trajectory(model, node_coords[0])
        record = PlanRecord(path, node_coords, spline, cost, start_z.coords, goal_z.coords)
        return trajectory, record

    spline = fit_spline(node_coords, request.control_points)
    control = spline.control_points.copy()
    control[0] = start_z.coords
    control[-1] = goal_z.coords
    spline = spline.with_control_points(control)
    if request.refine:
        ambient = AmbientMetricSpec(request.obstacles)
        spline = refine_spline(
            model, spline, ambient,
            iterations=request.refine_iterations,
            bounds=(graph.bbox_min, graph.bbox_max),
        )
    trajectory = decode_trajectory(model, spline, request.samples)
    record = PlanRecord(path, node_coords, spline, cost, start_z.coords, goal_z.coords)
    return trajectory, record


@dataclass
class ReplanTick:
    tick: int
    trajectory: Trajectory
    node_path: list[int]
    graph_cost: float
    obstacles: tuple[Obstacle, ...]


def replan_loop(
    model: ManifoldModel,
    graph: GeodesicGraph,
    script: ReplanScript,
    request: PlanRequest,
) -> tuple[list[ReplanTick], TimingReport]:
    """Scripted dynamic-obstacle run.

    Per tick: update obstacle weights (cache-only), Dijkstra from the current
    progress node to the goal, re-fit the spline. Only those three steps are
    timed; trajectory decoding happens outside the timer. Progress advances
    one node per tick along the previous plan.
    """
    start_z, _ = encode(model, request.start)
    goal_z, _ = encode(model, request.goal)
    goal_node = graph.snap(goal_z)
    current = graph.snap(start_z)

    ticks: list[ReplanTick] = []
    times_ms: list[float] = []
    for tick in range(script.total_ticks or 0):
        obstacles = script.obstacles_at(tick)

        t0 = time.perf_counter()
        apply_obstacles(graph, obstacles)
        path, cost = shortest_path(graph, current, goal_node)
        coords = graph.node_coords[path]
        if len(path) >= 2:
            spline = fit_spline(coords, request.control_points)
        else:
            spline = fit_spline(np.stack([coords[0], coords[0]]), 2)
        times_ms.append((time.perf_counter() - t0) * 1000.0)

        if len(path) >= 2:
            trajectory = decode_trajectory(model, spline, request.samples)
        else:
            trajectory = _constant_trajectory(model, coords[0])
        ticks.append(ReplanTick(tick, trajectory, path, cost, obstacles))
        if len(path) > 1:
            current = path[1]
    report = TimingReport(tick_ms=times_ms, budget_ms=1000.0 / script.rate_hz)
    return ticks, report
