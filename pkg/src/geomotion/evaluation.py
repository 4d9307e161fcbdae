"""Reconstruction metrics for a trained model against a dataset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import Demonstration
from .vae import ManifoldModel, _elbo_forward_backward, decode_batch, encode_batch


@dataclass
class EvalReport:
    samples: int
    position_rmse: float
    bbox_diagonal: float
    rmse_fraction: float
    orientation_angle_deg: float
    position_loglik: float
    orientation_loglik: float
    kl: float

    def lines(self) -> list[str]:
        return [
            f"samples: {self.samples}",
            f"position_rmse_m: {self.position_rmse:.6f}",
            f"bbox_diagonal_m: {self.bbox_diagonal:.6f}",
            f"position_rmse_fraction: {self.rmse_fraction:.4%}",
            f"orientation_angle_deg: {self.orientation_angle_deg:.4f}",
            f"elbo_position_loglik: {self.position_loglik:.4f}",
            f"elbo_orientation_loglik: {self.orientation_loglik:.4f}",
            f"elbo_kl: {self.kl:.4f}",
        ]


def orientation_angle_deg(predicted: np.ndarray, target: np.ndarray, m: int) -> np.ndarray:
    """Geodesic angle between orientations modulo the antipodal identification.

    For unit quaternions (m = 3) this is the rotation angle 2*acos(|dot|);
    for other spheres it is the plain great-circle angle acos(|dot|).
    """
    dots = np.abs(np.sum(predicted * target, axis=-1))
    angles = np.arccos(np.clip(dots, -1.0, 1.0))
    if m == 3:
        angles = 2.0 * angles
    return np.degrees(angles)


def evaluate(model: ManifoldModel, demos: list[Demonstration]) -> EvalReport:
    """Encode-decode reconstruction error plus deterministic ELBO terms.

    ELBO terms use the posterior mean (no sampling), so repeated runs agree
    exactly.
    """
    if not demos:
        raise ValueError("no demonstrations to evaluate")
    data = np.concatenate([d.ambient_array() for d in demos], axis=0)
    x = data[:, : model.n]
    q = data[:, model.n :]

    means, _ = encode_batch(model, data)
    positions, _, orientations, _ = decode_batch(model, means)
    sq_err = np.sum((positions - x) ** 2, axis=1)
    rmse = float(np.sqrt(np.mean(sq_err)))
    angles = orientation_angle_deg(orientations, q, model.m)

    bbox = x.max(axis=0) - x.min(axis=0)
    diagonal = float(np.linalg.norm(bbox))

    report, _ = _elbo_forward_backward(
        model.encoder_mean,
        model.encoder_logstd,
        model.decoder_mean,
        model.position_precision,
        model.concentration,
        model.fixed_kappa,
        data,
        np.zeros((data.shape[0], model.d)),
        model.n,
        model.alpha,
        model.beta,
        want_grads=False,
    )
    return EvalReport(
        samples=data.shape[0],
        position_rmse=rmse,
        bbox_diagonal=diagonal,
        rmse_fraction=rmse / diagonal if diagonal > 0 else float("inf"),
        orientation_angle_deg=float(np.mean(angles)),
        position_loglik=report.position_loglik,
        orientation_loglik=report.orientation_loglik,
        kl=report.kl,
    )
