"""Small feed-forward networks (MLP, RBF) with analytic Jacobians.

Everything is float64 numpy. Forward and Jacobian evaluation on a frozen net
are pure functions and safe for concurrent callers; training mutates
parameters in place and is single-writer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Mlp:
    """Fully-connected net, tanh hidden layers, linear output.

    widths = [input, hidden..., output]; weights[i] maps widths[i] ->
    widths[i+1]. Zero hidden layers (a single affine map) is allowed.
    """

    widths: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def parameters(self) -> list[np.ndarray]:
        return list(self.weights) + list(self.biases)

    def copy(self) -> "Mlp":
        return Mlp(list(self.widths), [w.copy() for w in self.weights], [b.copy() for b in self.biases])


def mlp_init(widths: list[int], rng: np.random.Generator) -> Mlp:
    """Xavier-uniform weights, zero biases."""
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ValueError(f"invalid layer widths {widths}")
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(list(widths), weights, biases)


def _check_input(dim: int, z: np.ndarray, who: str) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != dim:
        raise ValueError(f"{who}: input dimension {z.shape[-1]} does not match {dim}")
    return z


def mlp_forward(net: Mlp, z: np.ndarray) -> np.ndarray:
    """Evaluate the net. z may be a single vector (d,) or a batch (B, d)."""
    z = _check_input(net.input_dim, z, "mlp_forward")
    h = np.atleast_2d(z)
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if i != last:
            h = np.tanh(h)
    return h[0] if z.ndim == 1 else h


def mlp_forward_cached(net: Mlp, z: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched forward that also returns per-layer activations for backprop.

    cache[0] is the input batch; cache[i] for i >= 1 is the post-tanh hidden
    activation of layer i (the output layer is not cached).
    """
    h = np.atleast_2d(_check_input(net.input_dim, z, "mlp_forward"))
    cache = [h]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if i != last:
            h = np.tanh(h)
            cache.append(h)
    return h, cache


def mlp_backward(net: Mlp, cache: list[np.ndarray], grad_out: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Reverse pass through the cached forward.

    grad_out is d(loss)/d(output), shape (B, output_dim), already carrying any
    batch scaling. Returns (weight grads, bias grads, d(loss)/d(input)).
    """
    grad_w = [None] * len(net.weights)
    grad_b = [None] * len(net.biases)
    delta = np.atleast_2d(grad_out)
    for i in range(len(net.weights) - 1, -1, -1):
        h_in = cache[i]
        grad_w[i] = delta.T @ h_in
        grad_b[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i]
        if i > 0:
            delta = delta * (1.0 - cache[i] ** 2)
    return grad_w, grad_b, delta


def mlp_jacobian(net: Mlp, z: np.ndarray) -> np.ndarray:
    """Exact Jacobian d(output)/d(z) at a single point, shape (output, input)."""
    z = _check_input(net.input_dim, z, "mlp_jacobian")
    if z.ndim != 1:
        raise ValueError("mlp_jacobian expects a single point; use mlp_jacobian_batch")
    return mlp_jacobian_batch(net, z[None, :])[0]


def mlp_jacobian_batch(net: Mlp, z: np.ndarray) -> np.ndarray:
    """Jacobians for a batch of points, shape (B, output, input).

    Forward-mode chain rule: propagate J through each layer as
    J <- diag(1 - h^2) W J.
    """
    z = np.atleast_2d(_check_input(net.input_dim, z, "mlp_jacobian"))
    b_size = z.shape[0]
    h = z
    jac = np.broadcast_to(np.eye(net.input_dim), (b_size, net.input_dim, net.input_dim)).copy()
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        jac = np.einsum("oi,bij->boj", w, jac, optimize=True)
        if i != last:
            h = np.tanh(h)
            jac = (1.0 - h**2)[:, :, None] * jac
    return jac


@dataclass
class RbfNet:
    """Radial basis expansion with nonnegative mixing weights and a floor.

    output_i(z) = sum_k weights[i, k] * exp(-gamma * |z - centers[k]|^2) + floor,
    so the output is strictly positive everywhere and decays to the floor far
    from all centers.
    """

    centers: np.ndarray  # (K, d)
    gamma: float
    weights: np.ndarray  # (output_dim, K)
    floor: float

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.gamma <= 0:
            raise ValueError("rbf bandwidth gamma must be positive")
        if self.floor <= 0:
            raise ValueError("rbf floor must be positive")
        if np.any(self.weights < 0):
            raise ValueError("rbf weights must be nonnegative")
        if self.weights.shape[1] != self.centers.shape[0]:
            raise ValueError("rbf weights and centers disagree on kernel count")

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights.shape[0]

    def parameters(self) -> list[np.ndarray]:
        return [self.weights]

    def copy(self) -> "RbfNet":
        return RbfNet(self.centers.copy(), self.gamma, self.weights.copy(), self.floor)


# Batched RBF ops materialize (B, K, d) intermediates; chunk large batches.
_RBF_CHUNK = 4096


def rbf_kernels(net: RbfNet, z: np.ndarray) -> np.ndarray:
    """Kernel activations exp(-gamma |z - c_k|^2), shape (B, K)."""
    z = np.atleast_2d(_check_input(net.input_dim, z, "rbf_forward"))
    if z.shape[0] > _RBF_CHUNK:
        return np.concatenate([rbf_kernels(net, z[i : i + _RBF_CHUNK]) for i in range(0, z.shape[0], _RBF_CHUNK)])
    sq = np.sum((z[:, None, :] - net.centers[None, :, :]) ** 2, axis=2)
    return np.exp(-net.gamma * sq)


def rbf_forward(net: RbfNet, z: np.ndarray) -> np.ndarray:
    z_arr = np.asarray(z, dtype=np.float64)
    k = rbf_kernels(net, z_arr)
    out = k @ net.weights.T + net.floor
    return out[0] if z_arr.ndim == 1 else out


def rbf_jacobian(net: RbfNet, z: np.ndarray) -> np.ndarray:
    """Analytic Jacobian at a single point, shape (output, d)."""
    z = _check_input(net.input_dim, z, "rbf_jacobian")
    if z.ndim != 1:
        raise ValueError("rbf_jacobian expects a single point; use rbf_jacobian_batch")
    return rbf_jacobian_batch(net, z[None, :])[0]


def rbf_jacobian_batch(net: RbfNet, z: np.ndarray) -> np.ndarray:
    """Batched Jacobians, shape (B, output, d)."""
    z = np.atleast_2d(_check_input(net.input_dim, z, "rbf_jacobian"))
    if z.shape[0] > _RBF_CHUNK:
        return np.concatenate([rbf_jacobian_batch(net, z[i : i + _RBF_CHUNK]) for i in range(0, z.shape[0], _RBF_CHUNK)])
    diff = z[:, None, :] - net.centers[None, :, :]  # (B, K, d)
    k = np.exp(-net.gamma * np.sum(diff**2, axis=2))  # (B, K)
    scaled = (-2.0 * net.gamma) * diff * k[:, :, None]  # (B, K, d)
    return np.einsum("ok,bkd->bod", net.weights, scaled, optimize=True)


def rbf_weight_gradient(net: RbfNet, z: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """d(loss)/d(weights) given d(loss)/d(output) for a batch, shape (out, K)."""
    k = rbf_kernels(net, z)
    return np.atleast_2d(grad_out).T @ k


def project_nonnegative(net: RbfNet) -> None:
    """Clamp mixing weights to the nonnegative orthant, in place."""
    np.maximum(net.weights, 0.0, out=net.weights)


@dataclass
class AdamState:
    """First/second moment accumulators aligned with a parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


@dataclass
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, config: AdamConfig) -> None:
    """One Adam update, applied to params in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("adam_step: parameter, gradient and state lists must align")
    state.step += 1
    b1c = 1.0 - config.beta1**state.step
    b2c = 1.0 - config.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("adam_step: gradient shape mismatch")
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        p -= config.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + config.eps)


def kmeans(points: np.ndarray, k: int, rng: np.random.Generator, iters: int = 50) -> np.ndarray:
    """Plain seeded k-means (k-means++ init, Lloyd updates). Returns (k, d) centers.

    Deterministic for a fixed generator state. Empty clusters are re-seeded on
    the point farthest from its assigned center.
    """
    points = np.asarray(points, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(points):
        raise ValueError("k exceeds number of points")
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(len(points))]
    dist_sq = np.sum((points - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = dist_sq.sum()
        if total <= 0:
            centers[i] = points[rng.integers(len(points))]
        else:
            centers[i] = points[rng.choice(len(points), p=dist_sq / total)]
        dist_sq = np.minimum(dist_sq, np.sum((points - centers[i]) ** 2, axis=1))
    for _ in range(iters):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = points[assign == j]
            if len(members):
                new_centers[j] = members.mean(axis=0)
            else:
                worst = np.argmax(np.min(d2, axis=1))
                new_centers[j] = points[worst]
        if np.allclose(new_centers, centers, atol=1e-12, rtol=0.0):
            centers = new_centers
            break
        centers = new_centers
    return centers
