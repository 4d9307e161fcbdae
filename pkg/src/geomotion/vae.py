"""Variational autoencoder over R^n x S^m poses.

The generative model factorizes p(x, q | z) = N(x | mu_pos(z), sigma^2(z) I) *
antipodal-vMF(q | mu_ori(z), kappa(z)). One network decodes the joint mean; its
orientation block is projected onto the sphere. Data dispersion is carried by
two RBF heads (per-axis position precision, scalar concentration) so that
uncertainty grows away from the data.

Training runs in two stages: first the encoder and decoder means with unit
position variance and a fixed concentration, then, with means frozen, the RBF
heads over k-means centers placed on the encoded training set.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .nets import (
    AdamConfig,
    AdamState,
    Mlp,
    RbfNet,
    adam_step,
    kmeans,
    mlp_backward,
    mlp_forward,
    mlp_forward_cached,
    mlp_init,
    project_nonnegative,
    rbf_forward,
    rbf_jacobian_batch,
    rbf_kernels,
    rbf_weight_gradient,
)
from .types import Demonstration, LatentPoint, Pose, antipodal_double, normalize_orientation
from .vmf import bessel_ratio, log_vmf_normalizer

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class TrainConfig:
    latent_dim: int = 2
    hidden: tuple[int, ...] = (200, 100)
    rbf_kernels: int = 500
    alpha: float | None = None  # defaults to 1 / mean per-axis position variance
    beta: float | None = None  # defaults to n / (m + 1)
    epochs: int = 2000
    stage2_epochs: int = 500
    batch_size: int = 64
    learning_rate: float = 1e-3
    fixed_kappa: float = 10.0
    floor: float = 1e-2
    gamma: float | None = None  # defaults to 0.5 / mean(nearest-center dist)^2
    # fraction of stage-1 epochs over which the position weight ramps up;
    # orientation organizes the latent first, which breaks the antipodal
    # symmetry into two clusters before the (shared) positions pull twins
    # together
    alpha_warmup: float = 0.1
    seed: int = 0


@dataclass
class ManifoldModel:
    """Frozen immersion of the latent space into R^n x S^m.

    position_precision and concentration are None only for a stage-1-only
    model; decode and metric evaluation require the trained heads.
    """

    n: int
    m: int
    d: int
    encoder_mean: Mlp
    encoder_logstd: Mlp
    decoder_mean: Mlp
    position_precision: RbfNet | None
    concentration: RbfNet | None
    alpha: float
    beta: float
    fixed_kappa: float = 10.0
    training_latents: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ambient_dim(self) -> int:
        return self.n + self.m + 1

    def latent_bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if self.training_latents is None:
            raise ValueError("model carries no encoded training set")
        return self.training_latents.min(axis=0), self.training_latents.max(axis=0)

    def require_heads(self) -> None:
        if self.position_precision is None or self.concentration is None:
            raise ValueError("model has no trained variance/concentration heads")


@dataclass
class DecodedPose:
    position: np.ndarray
    position_std: np.ndarray
    orientation: np.ndarray
    concentration: float


@dataclass
class ElboReport:
    loss: float
    position_loglik: float
    orientation_loglik: float
    kl: float


def encode(model: ManifoldModel, pose: Pose) -> tuple[LatentPoint, np.ndarray]:
    """Gaussian posterior parameters (mean, std) for one pose. Deterministic."""
    if pose.n != model.n or pose.m != model.m:
        raise ValueError("pose dimensions do not match the model")
    x = pose.ambient()
    mean = mlp_forward(model.encoder_mean, x)
    std = np.exp(mlp_forward(model.encoder_logstd, x))
    return LatentPoint(mean), std


def encode_batch(model: ManifoldModel, ambient: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = mlp_forward(model.encoder_mean, ambient)
    stds = np.exp(mlp_forward(model.encoder_logstd, ambient))
    return means, stds


def decode(model: ManifoldModel, z: LatentPoint | np.ndarray) -> DecodedPose:
    """Mean reconstruction at z plus the predictive spread (std, concentration)."""
    model.require_heads()
    coords = z.coords if isinstance(z, LatentPoint) else np.asarray(z, dtype=np.float64)
    if coords.shape != (model.d,):
        raise ValueError(f"latent point must have dimension {model.d}")
    y = mlp_forward(model.decoder_mean, coords)
    ori, _ = normalize_orientation(y[model.n :])
    prec = rbf_forward(model.position_precision, coords)
    kappa = float(rbf_forward(model.concentration, coords)[0])
    return DecodedPose(position=y[: model.n], position_std=prec**-0.5, orientation=ori, concentration=kappa)


def decode_batch(model: ManifoldModel, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized decode: (positions, position stds, orientations, concentrations)."""
    model.require_heads()
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    y = mlp_forward(model.decoder_mean, coords)
    raw = y[:, model.n :]
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms <= 1e-12):
        raise ValueError("degenerate quaternion: decoder orientation head collapsed")
    ori = raw / norms[:, None]
    prec = rbf_forward(model.position_precision, coords)
    kappa = rbf_forward(model.concentration, coords)[:, 0]
    return y[:, : model.n], prec**-0.5, ori, kappa


@dataclass
class _ElboGrads:
    encoder_mean: tuple[list[np.ndarray], list[np.ndarray]]
    encoder_logstd: tuple[list[np.ndarray], list[np.ndarray]]
    decoder_mean: tuple[list[np.ndarray], list[np.ndarray]]
    precision_weights: np.ndarray | None
    concentration_weights: np.ndarray | None


def _elbo_forward_backward(
    encoder_mean: Mlp,
    encoder_logstd: Mlp,
    decoder_mean: Mlp,
    precision: RbfNet | None,
    concentration: RbfNet | None,
    fixed_kappa: float,
    batch: np.ndarray,
    eps: np.ndarray,
    n: int,
    alpha: float,
    beta: float,
    want_grads: bool = True,
    antipodal: bool = True,
) -> tuple[ElboReport, _ElboGrads | None]:
    """Loss -(alpha L_x + beta L_q - KL) averaged over the batch, plus exact
    gradients for every trainable parameter (including the z-dependence of the
    RBF heads, so finite-difference checks hold for any parameter).

    antipodal=False evaluates the orientation term with the single vMF
    component the sample is assigned to instead of the symmetric mixture: the
    hard-assignment EM bound used while training the decoder means. The
    mixture itself is indifferent to which hypersphere side a latent point
    decodes to, so only this bound forces the antipodal copies into separate
    latent clusters; the full mixture remains the model's density everywhere
    else."""
    b_size, ambient_dim = batch.shape
    dim_q = ambient_dim - n
    x, q = batch[:, :n], batch[:, n:]

    mu_e, cache_mu = mlp_forward_cached(encoder_mean, batch)
    logs, cache_ls = mlp_forward_cached(encoder_logstd, batch)
    sigma = np.exp(logs)
    z = mu_e + sigma * eps

    y, cache_dec = mlp_forward_cached(decoder_mean, z)
    y_pos, y_raw = y[:, :n], y[:, n:]
    norms = np.linalg.norm(y_raw, axis=1)
    if np.any(norms <= 1e-12):
        raise ValueError("degenerate quaternion: decoder orientation head collapsed")
    u = y_raw / norms[:, None]
    t = np.sum(u * q, axis=1)

    prec = rbf_forward(precision, z) if precision is not None else np.ones_like(y_pos)
    kappa = rbf_forward(concentration, z)[:, 0] if concentration is not None else np.full(b_size, fixed_kappa)

    resid = x - y_pos
    l_x = -0.5 * np.sum(prec * resid**2 + LOG_2PI - np.log(prec), axis=1)
    if antipodal:
        l_q = np.log(0.5) + log_vmf_normalizer(kappa, dim_q) + np.logaddexp(kappa * t, -kappa * t)
    else:
        l_q = np.log(0.5) + log_vmf_normalizer(kappa, dim_q) + kappa * t
    kl = 0.5 * np.sum(mu_e**2 + sigma**2 - 1.0 - 2.0 * logs, axis=1)

    for name, term in (("L_x", l_x), ("L_q", l_q), ("KL", kl)):
        if not np.all(np.isfinite(term)):
            raise ValueError(f"non-finite loss term {name}")

    report = ElboReport(
        loss=float(-np.mean(alpha * l_x + beta * l_q - kl)),
        position_loglik=float(np.mean(l_x)),
        orientation_loglik=float(np.mean(l_q)),
        kl=float(np.mean(kl)),
    )
    if not want_grads:
        return report, None

    scale = -1.0 / b_size  # d(loss)/d(L_i)
    # d l_q / d t and d l_q / d kappa for the mixture vs the assigned component
    dlq_dt = np.tanh(kappa * t) if antipodal else np.ones_like(t)

    g_y_pos = scale * alpha * prec * resid
    g_t = scale * beta * kappa * dlq_dt
    g_raw = g_t[:, None] * (q - u * t[:, None]) / norms[:, None]
    grad_w_dec, grad_b_dec, g_z = mlp_backward(decoder_mean, cache_dec, np.concatenate([g_y_pos, g_raw], axis=1))

    g_prec_weights = None
    if precision is not None:
        g_prec = scale * alpha * (-0.5) * (resid**2 - 1.0 / prec)
        g_prec_weights = rbf_weight_gradient(precision, z, g_prec)
        g_z = g_z + np.einsum("bod,bo->bd", rbf_jacobian_batch(precision, z), g_prec, optimize=True)
    g_conc_weights = None
    if concentration is not None:
        g_kappa = scale * beta * (t * dlq_dt - bessel_ratio(kappa, dim_q))
        g_conc_weights = rbf_weight_gradient(concentration, z, g_kappa[:, None])
        g_z = g_z + rbf_jacobian_batch(concentration, z)[:, 0, :] * g_kappa[:, None]

    g_mu_e = g_z + (1.0 / b_size) * mu_e
    g_logs = g_z * sigma * eps + (1.0 / b_size) * (sigma**2 - 1.0)
    grad_w_mu, grad_b_mu, _ = mlp_backward(encoder_mean, cache_mu, g_mu_e)
    grad_w_ls, grad_b_ls, _ = mlp_backward(encoder_logstd, cache_ls, g_logs)

    grads = _ElboGrads(
        encoder_mean=(grad_w_mu, grad_b_mu),
        encoder_logstd=(grad_w_ls, grad_b_ls),
        decoder_mean=(grad_w_dec, grad_b_dec),
        precision_weights=g_prec_weights,
        concentration_weights=g_conc_weights,
    )
    return report, grads


def elbo(model: ManifoldModel, poses: list[Pose], rng: int | np.random.Generator) -> ElboReport:
    """Single-sample reparameterized ELBO over a minibatch of poses.

    The minibatch is expected to be antipodally doubled already; this function
    does not double it again.
    """
    if not poses:
        raise ValueError("empty minibatch")
    batch = np.stack([p.ambient() for p in poses])
    gen = np.random.default_rng(rng) if isinstance(rng, int) else rng
    eps = gen.standard_normal((batch.shape[0], model.d))
    report, _ = _elbo_forward_backward(
        model.encoder_mean,
        model.encoder_logstd,
        model.decoder_mean,
        model.position_precision,
        model.concentration,
        model.fixed_kappa,
        batch,
        eps,
        model.n,
        model.alpha,
        model.beta,
        want_grads=False,
    )
    return report


def gaussian_kl(mu: np.ndarray, sigma: np.ndarray) -> float:
    """Closed-form KL(N(mu, diag sigma^2) || N(0, I))."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    return float(0.5 * np.sum(mu**2 + sigma**2 - 1.0 - 2.0 * np.log(sigma)))


def _flatten_stage1(grads: _ElboGrads) -> list[np.ndarray]:
    gw_mu, gb_mu = grads.encoder_mean
    gw_ls, gb_ls = grads.encoder_logstd
    gw_dec, gb_dec = grads.decoder_mean
    return gw_mu + gb_mu + gw_ls + gb_ls + gw_dec + gb_dec


def train(demos: list[Demonstration], config: TrainConfig) -> ManifoldModel:
    """Fit the manifold model to demonstrations (antipodal doubling included)."""
    if len(demos) < 2:
        raise ValueError("training requires at least 2 demonstrations")
    n, m = demos[0].n, demos[0].m
    doubled = antipodal_double(demos)
    data = np.concatenate([demo.ambient_array() for demo in doubled], axis=0)
    n_samples = data.shape[0]
    ambient_dim = n + m + 1
    d = config.latent_dim
    beta = config.beta if config.beta is not None else n / (m + 1)
    if config.alpha is not None:
        alpha = config.alpha
    else:
        # unit alpha drowns the position likelihood for metric-scale
        # workspaces (the per-sample term is ~variance while the KL is ~1
        # nat). Scale it so the stage-1 unit-variance Gaussian behaves like a
        # noise floor of a quarter of the per-axis data spread.
        pos_var = float(np.mean(np.var(data[:, :n], axis=0)))
        alpha = 16.0 / pos_var if pos_var > 1e-12 else 1.0
    rng = np.random.default_rng(config.seed)

    hidden = list(config.hidden)
    encoder_mean = mlp_init([ambient_dim, *hidden, d], rng)
    encoder_logstd = mlp_init([ambient_dim, *hidden, d], rng)
    decoder_mean = mlp_init([d, *hidden, ambient_dim], rng)
    # break the antipodal symmetry at initialization: an orientation-sensitive
    # first layer starts the q/-q copies in separate latent regions, and a
    # small initial posterior std keeps that structure from being washed out
    # by the reparameterization noise before the decoder locks onto it
    encoder_mean.weights[0][:, n:] *= 3.0
    encoder_logstd.biases[-1] += np.log(0.1)

    adam_cfg = AdamConfig(learning_rate=config.learning_rate)
    params1 = encoder_mean.parameters() + encoder_logstd.parameters() + decoder_mean.parameters()
    state1 = AdamState.for_params(params1)
    batch_size = min(config.batch_size, n_samples)

    warmup_epochs = max(1, int(round(config.alpha_warmup * config.epochs)))
    t_start = time.perf_counter()
    stage1_losses = []
    for epoch in range(config.epochs):
        alpha_t = alpha * min(1.0, (epoch + 1) / warmup_epochs) if config.alpha_warmup > 0 else alpha
        perm = rng.permutation(n_samples)
        epoch_loss = 0.0
        steps = 0
        for lo in range(0, n_samples, batch_size):
            batch = data[perm[lo : lo + batch_size]]
            eps = rng.standard_normal((batch.shape[0], d))
            report, grads = _elbo_forward_backward(
                encoder_mean, encoder_logstd, decoder_mean, None, None,
                config.fixed_kappa, batch, eps, n, alpha_t, beta,
                antipodal=False,
            )
            adam_step(params1, _flatten_stage1(grads), state1, adam_cfg)
            epoch_loss += report.loss
            steps += 1
        stage1_losses.append(epoch_loss / max(steps, 1))

    latents = mlp_forward(encoder_mean, data)
    k = config.rbf_kernels
    if k > n_samples:
        warnings.warn(f"rbf kernel count {k} exceeds {n_samples} training points; reducing")
        k = n_samples
    centers = kmeans(latents, k, rng)
    if config.gamma is not None:
        gamma = config.gamma
    elif k > 1:
        # kernel width tied to the center spacing keeps the kernel sum smooth
        # between centers (point-to-center distances would be far narrower)
        gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
        np.fill_diagonal(gaps, np.inf)
        mean_gap = float(np.mean(np.min(gaps, axis=1)))
        gamma = 0.5 / mean_gap**2 if mean_gap > 1e-9 else 1.0
    else:
        gamma = 1.0

    kernel_sum = np.mean(np.sum(np.exp(-gamma * np.sum((latents[:, None, :] - centers[None, :, :]) ** 2, axis=2)), axis=1))
    kernel_sum = max(kernel_sum, 1e-6)
    w_prec = max((1.0 - config.floor) / kernel_sum, 0.0)
    w_conc = max((config.fixed_kappa - config.floor) / kernel_sum, 0.0)
    precision = RbfNet(centers, gamma, np.full((n, k), w_prec), config.floor)
    concentration = RbfNet(centers, gamma, np.full((1, k), w_conc), config.floor)

    params2 = precision.parameters() + concentration.parameters()
    state2 = AdamState.for_params(params2)
    stage2_losses = []
    for _ in range(config.stage2_epochs):
        perm = rng.permutation(n_samples)
        epoch_loss = 0.0
        steps = 0
        for lo in range(0, n_samples, batch_size):
            batch = data[perm[lo : lo + batch_size]]
            eps = rng.standard_normal((batch.shape[0], d))
            report, grads = _elbo_forward_backward(
                encoder_mean, encoder_logstd, decoder_mean, precision, concentration,
                config.fixed_kappa, batch, eps, n, alpha, beta,
            )
            adam_step(params2, [grads.precision_weights, grads.concentration_weights], state2, adam_cfg)
            project_nonnegative(precision)
            project_nonnegative(concentration)
            epoch_loss += report.loss
            steps += 1
        stage2_losses.append(epoch_loss / max(steps, 1))

    training_latents = mlp_forward(encoder_mean, data)
    meta = {
        "seed": config.seed,
        "epochs": config.epochs,
        "stage2_epochs": config.stage2_epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "rbf_kernels": k,
        "gamma": gamma,
        "floor": config.floor,
        "hidden": hidden,
        "stage1_losses": stage1_losses,
        "stage2_losses": stage2_losses,
        "final_loss": (stage2_losses or stage1_losses)[-1] if (stage2_losses or stage1_losses) else None,
        "train_seconds": time.perf_counter() - t_start,
        "train_samples": n_samples,
    }
    return ManifoldModel(
        n=n,
        m=m,
        d=d,
        encoder_mean=encoder_mean,
        encoder_logstd=encoder_logstd,
        decoder_mean=decoder_mean,
        position_precision=precision,
        concentration=concentration,
        alpha=alpha,
        beta=beta,
        fixed_kappa=config.fixed_kappa,
        training_latents=training_latents,
        meta=meta,
    )
