"""Induced Riemannian metric on the latent space.

With the joint decoder mean f(z) = (mu_pos(z), project(mu_ori(z))), position
std head s(z) = precision(z)^(-1/2) and concentration head k(z), the metric is

    M(z) = lambda(z) * M_pos(z) + M_ori(z)
    M_pos = J_pos^T J_pos + J_s^T J_s
    M_ori = J_ori^T J_ori + J_k^T J_k

where lambda(z) >= 1 is the obstacle-driven ambient factor evaluated at the
decoded position mean. With no obstacles lambda = 1 and the metric is the
plain uncertainty-aware pullback; obstacles only ever inflate the position
block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import mlp_forward, mlp_jacobian_batch, rbf_forward, rbf_jacobian_batch
from .types import LatentPoint, Obstacle
from .vae import ManifoldModel


@dataclass(frozen=True)
class AmbientMetricSpec:
    """Obstacle set shaping the position part of the ambient metric.

    The orientation block is always the identity. An empty obstacle list makes
    the whole ambient metric the identity.
    """

    obstacles: tuple[Obstacle, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    @classmethod
    def empty(cls) -> "AmbientMetricSpec":
        return cls(())


def ambient_factor(x: np.ndarray, obstacles: tuple[Obstacle, ...] | list[Obstacle]) -> np.ndarray | float:
    """prod_j (1 + eta_j * exp(-|x - o_j|^2 / (2 r_j^2))); always >= 1.

    x may be one position (n,) or a batch (B, n).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    factor = np.ones(pts.shape[0])
    for obs in obstacles:
        sq = np.sum((pts - obs.center) ** 2, axis=1)
        factor *= 1.0 + obs.strength * np.exp(-sq / (2.0 * obs.radius**2))
    return float(factor[0]) if single else factor


def metric_blocks(model: ManifoldModel, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Batched position/orientation metric blocks at coords (B, d).

    Returns (M_pos, M_ori, decoded positions, decoded orientations) with the
    blocks shaped (B, d, d). These are the obstacle-independent pieces; the
    full metric is lambda * M_pos + M_ori.
    """
    model.require_heads()
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    n = model.n

    y = mlp_forward(model.decoder_mean, coords)
    jac = mlp_jacobian_batch(model.decoder_mean, coords)
    j_pos = jac[:, :n, :]
    raw = y[:, n:]
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms <= 1e-12):
        raise ValueError("degenerate quaternion: decoder orientation head collapsed")
    u = raw / norms[:, None]
    # sphere projection: J_ori = (I - u u^T) J_raw / |raw|
    j_raw = jac[:, n:, :]
    j_ori = (j_raw - u[:, :, None] * np.einsum("bi,bij->bj", u, j_raw, optimize=True)[:, None, :]) / norms[:, None, None]

    prec = rbf_forward(model.position_precision, coords)
    j_prec = rbf_jacobian_batch(model.position_precision, coords)
    j_std = -0.5 * prec[:, :, None] ** -1.5 * j_prec
    j_kappa = rbf_jacobian_batch(model.concentration, coords)

    m_pos = np.einsum("boi,boj->bij", j_pos, j_pos, optimize=True)
    m_pos += np.einsum("boi,boj->bij", j_std, j_std, optimize=True)
    m_ori = np.einsum("boi,boj->bij", j_ori, j_ori, optimize=True)
    m_ori += np.einsum("boi,boj->bij", j_kappa, j_kappa, optimize=True)
    m_pos = 0.5 * (m_pos + np.swapaxes(m_pos, 1, 2))
    m_ori = 0.5 * (m_ori + np.swapaxes(m_ori, 1, 2))
    if not (np.all(np.isfinite(m_pos)) and np.all(np.isfinite(m_ori))):
        raise ValueError("non-finite Jacobians in metric evaluation")
    return m_pos, m_ori, y[:, :n], u


def pullback_metric(
    model: ManifoldModel,
    z: LatentPoint | np.ndarray,
    ambient: AmbientMetricSpec | None = None,
) -> np.ndarray:
    """The d x d metric tensor at a single latent point (symmetric PD)."""
    coords = z.coords if isinstance(z, LatentPoint) else np.asarray(z, dtype=np.float64)
    m_pos, m_ori, pos, _ = metric_blocks(model, coords[None, :])
    lam = 1.0 if ambient is None else ambient_factor(pos[0], ambient.obstacles)
    return lam * m_pos[0] + m_ori[0]


def pullback_metric_batch(model: ManifoldModel, coords: np.ndarray, ambient: AmbientMetricSpec | None = None) -> np.ndarray:
    m_pos, m_ori, pos, _ = metric_blocks(model, coords)
    if ambient is None or not ambient.obstacles:
        return m_pos + m_ori
    lam = ambient_factor(pos, ambient.obstacles)
    return lam[:, None, None] * m_pos + m_ori


def curve_length(model: ManifoldModel, curve: np.ndarray, ambient: AmbientMetricSpec | None = None) -> float:
    """Discrete Riemannian length of a latent polyline (T, d).

    Each segment uses the mean of its endpoint metrics, so every point's
    metric is evaluated exactly once.
    """
    curve = np.atleast_2d(np.asarray(curve, dtype=np.float64))
    if curve.shape[0] < 2:
        raise ValueError("curve needs at least 2 points")
    metrics = pullback_metric_batch(model, curve, ambient)
    mid = 0.5 * (metrics[:-1] + metrics[1:])
    deltas = np.diff(curve, axis=0)
    energies = np.einsum("si,sij,sj->s", deltas, mid, deltas, optimize=True)
    return float(np.sum(np.sqrt(np.maximum(energies, 0.0))))


def magnification_factor(model: ManifoldModel, z: LatentPoint | np.ndarray, ambient: AmbientMetricSpec | None = None) -> float:
    """log sqrt(det M(z)); large where latent distances are inflated."""
    tensor = pullback_metric(model, z, ambient)
    sign, logdet = np.linalg.slogdet(tensor)
    if sign <= 0:
        raise ValueError("metric tensor is not positive definite")
    return float(0.5 * logdet)


def magnification_factor_batch(model: ManifoldModel, coords: np.ndarray, ambient: AmbientMetricSpec | None = None) -> np.ndarray:
    tensors = pullback_metric_batch(model, coords, ambient)
    signs, logdets = np.linalg.slogdet(tensors)
    if np.any(signs <= 0):
        raise ValueError("metric tensor is not positive definite")
    return 0.5 * logdets
