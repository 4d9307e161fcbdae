"""Grid-graph geodesics over the learned latent space.

The latent bounding box is discretized into a G x G 8-connected grid. Each
node's decoded pose and metric blocks are computed once at build time; each
edge stores split position/orientation energies so a moving obstacle only
rescales the position term:

    weight = sqrt(lambda_edge * e_pos + e_ori),  lambda_edge >= 1.

Shortest paths use Dijkstra on a CSR adjacency; obstacle updates touch the
edge weights in O(E) vectorized work without any decoder call. A lock makes
updates atomic with respect to concurrent path queries.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline, PPoly
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as csgraph_dijkstra

from .metric import AmbientMetricSpec, ambient_factor, curve_length, metric_blocks
from .types import LatentPoint, Obstacle
from .vae import ManifoldModel

OBSTACLE_INFLUENCE_EPS = 1e-3


@dataclass
class GeodesicGraph:
    grid_size: int
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    node_coords: np.ndarray  # (N, 2)
    node_positions: np.ndarray  # (N, n) decoded position means
    node_orientations: np.ndarray  # (N, m+1)
    node_metric_pos: np.ndarray  # (N, 2, 2)
    node_metric_ori: np.ndarray  # (N, 2, 2)
    edges: np.ndarray  # (E, 2) node index pairs, each undirected edge once
    edge_energy_pos: np.ndarray  # (E,)
    edge_energy_ori: np.ndarray  # (E,)
    edge_scale: np.ndarray  # (E,) current lambda per edge
    edge_weight: np.ndarray  # (E,) sqrt(scale * e_pos + e_ori)
    base_weight: np.ndarray  # (E,) weights with no obstacle
    _csr: csr_matrix = field(repr=False)
    _csr_perm: np.ndarray = field(repr=False)  # edge index feeding each csr.data slot
    _touched: np.ndarray = field(repr=False)  # edge indices scaled by the latest update
    _lock: threading.RLock = field(repr=False, default_factory=threading.RLock)

    @property
    def node_count(self) -> int:
        return self.node_coords.shape[0]

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    @property
    def spacing(self) -> np.ndarray:
        return (self.bbox_max - self.bbox_min) / (self.grid_size - 1)

    def snap(self, z: LatentPoint | np.ndarray) -> int:
        """Index of the grid node nearest to z (clipped into the box)."""
        coords = z.coords if isinstance(z, LatentPoint) else np.asarray(z, dtype=np.float64)
        cell = np.rint((coords - self.bbox_min) / self.spacing)
        cell = np.clip(cell, 0, self.grid_size - 1).astype(int)
        return int(cell[0] * self.grid_size + cell[1])


@dataclass
class ObstacleUpdate:
    """Which edges the latest apply_obstacles run rescaled."""

    touched_edges: np.ndarray
    previously_touched: np.ndarray
    touched_nodes: int


def _grid_edges(grid: int) -> np.ndarray:
    idx = np.arange(grid * grid).reshape(grid, grid)
    pairs = [
        np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1),
        np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1),
        np.stack([idx[:-1, :-1].ravel(), idx[1:, 1:].ravel()], axis=1),
        np.stack([idx[:-1, 1:].ravel(), idx[1:, :-1].ravel()], axis=1),
    ]
    return np.concatenate(pairs, axis=0)


def build_graph(model: ManifoldModel, grid_size: int = 100, margin: float = 0.15) -> GeodesicGraph:
    """Decode and cache a regular latent grid with per-edge split energies.

    The box is the encoded-training-set bounding box expanded by `margin` of
    its extent on every side.
    """
    if grid_size < 2:
        raise ValueError("grid size must be at least 2")
    if model.d != 2:
        raise ValueError("graph planning requires a 2-dimensional latent space")
    lo, hi = model.latent_bbox()
    extent = np.maximum(hi - lo, 1e-9)
    lo = lo - margin * extent
    hi = hi + margin * extent

    axes = [np.linspace(lo[k], hi[k], grid_size) for k in range(2)]
    g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
    coords = np.stack([g0.ravel(), g1.ravel()], axis=1)

    m_pos, m_ori, positions, orientations = metric_blocks(model, coords)

    edges = _grid_edges(grid_size)
    a, b = edges[:, 0], edges[:, 1]
    deltas = coords[b] - coords[a]
    mid_pos = 0.5 * (m_pos[a] + m_pos[b])
    mid_ori = 0.5 * (m_ori[a] + m_ori[b])
    e_pos = np.einsum("ei,eij,ej->e", deltas, mid_pos, deltas, optimize=True)
    e_ori = np.einsum("ei,eij,ej->e", deltas, mid_ori, deltas, optimize=True)
    e_pos = np.maximum(e_pos, 0.0)
    e_ori = np.maximum(e_ori, 0.0)
    base = np.sqrt(e_pos + e_ori)

    n_nodes = grid_size * grid_size
    n_edges = edges.shape[0]
    rows = np.concatenate([a, b])
    cols = np.concatenate([b, a])
    structure = csr_matrix((np.arange(1, 2 * n_edges + 1), (rows, cols)), shape=(n_nodes, n_nodes))
    perm = (structure.data - 1) % n_edges  # csr slot -> undirected edge index
    graph_csr = csr_matrix((base[perm], structure.indices, structure.indptr), shape=(n_nodes, n_nodes))

    return GeodesicGraph(
        grid_size=grid_size,
        bbox_min=lo,
        bbox_max=hi,
        node_coords=coords,
        node_positions=positions,
        node_orientations=orientations,
        node_metric_pos=m_pos,
        node_metric_ori=m_ori,
        edges=edges,
        edge_energy_pos=e_pos,
        edge_energy_ori=e_ori,
        edge_scale=np.ones(n_edges),
        edge_weight=base.copy(),
        base_weight=base,
        _csr=graph_csr,
        _csr_perm=perm,
        _touched=np.empty(0, dtype=np.int64),
    )


def apply_obstacles(graph: GeodesicGraph, obstacles: list[Obstacle] | tuple[Obstacle, ...]) -> ObstacleUpdate:
    """Rescale position energies from the cached decoded grid; no decoder calls.

    Edges incident to a node whose ambient factor exceeds 1 + eps get
    lambda = mean of the endpoint factors; every other edge is reset to the
    baseline weight. The swap is atomic with respect to path queries.
    """
    factors = np.atleast_1d(ambient_factor(graph.node_positions, tuple(obstacles)))
    influenced = factors > 1.0 + OBSTACLE_INFLUENCE_EPS
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    mask = influenced[a] | influenced[b]
    touched = np.flatnonzero(mask)

    new_scale = np.ones(graph.edge_count)
    new_weight = graph.base_weight.copy()
    if touched.size:
        lam = 0.5 * (factors[a[touched]] + factors[b[touched]])
        new_scale[touched] = lam
        new_weight[touched] = np.sqrt(lam * graph.edge_energy_pos[touched] + graph.edge_energy_ori[touched])

    with graph._lock:
        previous = graph._touched
        graph.edge_scale = new_scale
        graph.edge_weight = new_weight
        graph._csr.data[:] = new_weight[graph._csr_perm]
        graph._touched = touched
    return ObstacleUpdate(touched_edges=touched, previously_touched=previous, touched_nodes=int(influenced.sum()))


def shortest_path(
    graph: GeodesicGraph,
    start: LatentPoint | np.ndarray | int,
    goal: LatentPoint | np.ndarray | int,
) -> tuple[list[int], float]:
    """Minimum-weight node path between the snapped endpoints, plus its cost."""
    src = start if isinstance(start, int) else graph.snap(start)
    dst = goal if isinstance(goal, int) else graph.snap(goal)
    if src == dst:
        return [src], 0.0
    with graph._lock:
        dist, pred = csgraph_dijkstra(graph._csr, directed=True, indices=src, return_predecessors=True)
    if not np.isfinite(dist[dst]):
        raise ValueError("graph is disconnected between the requested endpoints")
    path = [dst]
    node = dst
    while node != src:
        node = int(pred[node])
        path.append(node)
    path.reverse()
    return path, float(dist[dst])


@dataclass
class SplinePath:
    """Clamped cubic B-spline over t in [0, 1].

    control_points are the B-spline coefficients (the first and last
    interpolate the curve endpoints); segment_coefficients holds the
    equivalent per-segment polynomial form, shaped (segments, degree+1, d)
    with the highest power first.
    """

    control_points: np.ndarray  # (N, d)
    knots: np.ndarray
    degree: int
    segment_breaks: np.ndarray
    segment_coefficients: np.ndarray

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    def __call__(self, t: np.ndarray | float) -> np.ndarray:
        spline = BSpline(self.knots, self.control_points, self.degree, extrapolate=False)
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        return spline(t)

    def sample(self, count: int) -> np.ndarray:
        return self(np.linspace(0.0, 1.0, count))

    def with_control_points(self, control: np.ndarray) -> "SplinePath":
        return _finalize_spline(control, self.knots, self.degree)


def _finalize_spline(control: np.ndarray, knots: np.ndarray, degree: int) -> SplinePath:
    breaks = np.unique(knots)
    per_dim = []
    for j in range(control.shape[1]):
        pp = PPoly.from_spline((knots, control[:, j], degree), extrapolate=False)
        keep = np.diff(pp.x) > 0
        per_dim.append(pp.c[:, keep])
    coeffs = np.stack(per_dim, axis=2).transpose(1, 0, 2)  # (segments, degree+1, d)
    return SplinePath(
        control_points=control,
        knots=knots,
        degree=degree,
        segment_breaks=breaks,
        segment_coefficients=coeffs,
    )


def fit_spline(points: np.ndarray, n_control: int = 16) -> SplinePath:
    """Least-squares clamped B-spline through a node polyline.

    The curve is parameterized uniformly on [0, 1]; both endpoints are
    interpolated exactly and interior control points minimize the mean squared
    deviation from the polyline samples.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n_points, dim = points.shape
    if n_points < 2:
        raise ValueError("spline fit needs at least 2 path points")
    if n_control < 2:
        raise ValueError("spline needs at least 2 control points")
    if n_control > n_points:
        warnings.warn(f"spline control count {n_control} exceeds {n_points} path points; clamping")
        n_control = n_points

    degree = min(3, n_control - 1)
    interior = np.linspace(0.0, 1.0, n_control - degree + 1)[1:-1]
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    t = np.linspace(0.0, 1.0, n_points)
    design = BSpline.design_matrix(t, knots, degree).toarray()

    control = np.empty((n_control, dim))
    control[0] = points[0]
    control[-1] = points[-1]
    if n_control > 2:
        rhs = points - np.outer(design[:, 0], points[0]) - np.outer(design[:, -1], points[-1])
        sol, *_ = np.linalg.lstsq(design[:, 1:-1], rhs, rcond=None)
        control[1:-1] = sol
    return _finalize_spline(control, knots, degree)


def refine_spline(
    model: ManifoldModel,
    spline: SplinePath,
    ambient: AmbientMetricSpec | None = None,
    iterations: int = 25,
    samples: int = 96,
    fd_step: float = 1e-4,
    bounds: tuple[np.ndarray, np.ndarray] | None = None,
) -> SplinePath:
    """Shorten the spline under the learned metric by moving interior control
    points (endpoints pinned); finite-difference gradient descent with
    backtracking, so the returned length never exceeds the input length.

    bounds restricts control points to a latent box (the graph chart, by
    default the model's training box with margin). Beyond the uncertainty wall
    the pullback metric collapses toward zero, so an unconstrained minimizer
    would tunnel through the wall and shortcut through the metrically-near far
    field, which defeats the on-manifold intent.
    """
    if iterations == 0:
        return spline
    n_control = spline.control_points.shape[0]
    if n_control <= 2:
        return spline
    if bounds is None:
        lo, hi = model.latent_bbox()
        extent = np.maximum(hi - lo, 1e-9)
        bounds = (lo - 0.15 * extent, hi + 0.15 * extent)

    t_grid = np.linspace(0.0, 1.0, samples)
    design = BSpline.design_matrix(t_grid, spline.knots, spline.degree).toarray()

    def objective(control: np.ndarray) -> float:
        return curve_length(model, design @ control, ambient)

    def clamp(control: np.ndarray) -> np.ndarray:
        control[1:-1] = np.clip(control[1:-1], bounds[0], bounds[1])
        return control

    control = clamp(spline.control_points.copy())
    best = objective(control)
    step = 0.5 * float(np.mean(np.linalg.norm(np.diff(control, axis=0), axis=1)) + 1e-9)
    free = slice(1, n_control - 1)
    for _ in range(iterations):
        grad = np.zeros_like(control)
        for i in range(1, n_control - 1):
            for j in range(control.shape[1]):
                control[i, j] += fd_step
                up = objective(control)
                control[i, j] -= 2 * fd_step
                down = objective(control)
                control[i, j] += fd_step
                grad[i, j] = (up - down) / (2 * fd_step)
        gnorm = float(np.linalg.norm(grad[free]))
        if gnorm < 1e-12:
            break
        improved = False
        trial_step = step
        for _ in range(12):
            candidate = control.copy()
            candidate[free] -= trial_step * grad[free] / gnorm
            candidate = clamp(candidate)
            value = objective(candidate)
            if value < best - 1e-12:
                control, best = candidate, value
                step = trial_step * 1.5
                improved = True
                break
            trial_step *= 0.5
        if not improved:
            break
    return spline.with_control_points(control)
