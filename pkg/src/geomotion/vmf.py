"""von Mises-Fisher log-densities on S^(D-1), with an antipodally symmetric mixture.

The normalizer C_D(kappa) = kappa^(D/2-1) / ((2 pi)^(D/2) I_(D/2-1)(kappa)) is
evaluated in the log domain through the exponentially scaled Bessel function
ive, which keeps it finite and accurate for kappa from ~1e-12 up to 1e4+.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ive

_KAPPA_TINY = 1e-12
UNIT_TOL = 1e-6


def uniform_log_density(dim: int) -> float:
    """log of the uniform density on S^(dim-1): -log(surface area)."""
    if dim < 2:
        raise ValueError("embedding dimension must be >= 2")
    return float(gammaln(dim / 2.0) - np.log(2.0) - (dim / 2.0) * np.log(np.pi))


def log_vmf_normalizer(kappa, dim: int):
    """log C_D(kappa); accepts scalar or array kappa >= 0.

    Uses log I_nu(k) = log(ive(nu, k)) + k. The kappa -> 0 limit is the
    uniform density on the sphere.
    """
    if dim < 2:
        raise ValueError("embedding dimension must be >= 2")
    kappa_arr = np.asarray(kappa, dtype=np.float64)
    if np.any(kappa_arr < 0):
        raise ValueError("concentration must be nonnegative")
    nu = dim / 2.0 - 1.0
    tiny = kappa_arr < _KAPPA_TINY
    safe = np.where(tiny, 1.0, kappa_arr)
    log_bessel = np.log(ive(nu, safe)) + safe
    out = nu * np.log(safe) - (dim / 2.0) * np.log(2.0 * np.pi) - log_bessel
    out = np.where(tiny, uniform_log_density(dim), out)
    return float(out) if np.isscalar(kappa) or kappa_arr.ndim == 0 else out


def bessel_ratio(kappa, dim: int):
    """A_D(kappa) = I_(D/2)(kappa) / I_(D/2-1)(kappa), the derivative of -log C_D.

    Monotone from 0 (kappa -> 0) to 1 (kappa -> inf).
    """
    kappa_arr = np.asarray(kappa, dtype=np.float64)
    nu = dim / 2.0 - 1.0
    tiny = kappa_arr < _KAPPA_TINY
    safe = np.where(tiny, 1.0, kappa_arr)
    ratio = ive(nu + 1.0, safe) / ive(nu, safe)
    ratio = np.where(tiny, 0.0, ratio)
    return float(ratio) if np.isscalar(kappa) or kappa_arr.ndim == 0 else ratio


@dataclass(frozen=True)
class VmfParams:
    """Mean direction (unit vector) and concentration of one vMF component."""

    mean_direction: np.ndarray
    concentration: float

    def __post_init__(self):
        mu = np.asarray(self.mean_direction, dtype=np.float64)
        object.__setattr__(self, "mean_direction", mu)
        object.__setattr__(self, "concentration", float(self.concentration))
        if abs(np.linalg.norm(mu) - 1.0) > UNIT_TOL:
            raise ValueError("vMF mean direction must be a unit vector")
        if self.concentration <= 0:
            raise ValueError("vMF concentration must be positive")


def _check_unit(q: np.ndarray, name: str) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if abs(np.linalg.norm(q) - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be a unit vector (tolerance {UNIT_TOL})")
    return q


def vmf_log_density(q: np.ndarray, params: VmfParams) -> float:
    """log vMF(q | mu, kappa) on S^(D-1) where D = len(q)."""
    q = _check_unit(q, "q")
    mu = params.mean_direction
    if q.shape != mu.shape:
        raise ValueError("q and mean direction must have equal dimension")
    dim = q.size
    return float(log_vmf_normalizer(params.concentration, dim) + params.concentration * np.dot(mu, q))


def antipodal_vmf_log_density(q: np.ndarray, mean_direction: np.ndarray, kappa: float) -> float:
    """log of the half/half mixture of vMF(mu, kappa) and vMF(-mu, kappa).

    Symmetric under q -> -q by construction. kappa = 0 degenerates to the
    uniform density regardless of mu.
    """
    q = _check_unit(q, "q")
    mu = _check_unit(mean_direction, "mean direction")
    if kappa < 0:
        raise ValueError("concentration must be nonnegative")
    dim = q.size
    if kappa < _KAPPA_TINY:
        return uniform_log_density(dim)
    t = float(np.dot(mu, q))
    return float(np.log(0.5) + log_vmf_normalizer(kappa, dim) + np.logaddexp(kappa * t, -kappa * t))


def antipodal_log_density_from_dot(t: np.ndarray, kappa: np.ndarray, dim: int) -> np.ndarray:
    """Batched antipodal mixture log-density given t = mu . q per sample."""
    t = np.asarray(t, dtype=np.float64)
    kappa = np.broadcast_to(np.asarray(kappa, dtype=np.float64), t.shape)
    return np.log(0.5) + log_vmf_normalizer(kappa, dim) + np.logaddexp(kappa * t, -kappa * t)
