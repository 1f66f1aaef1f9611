"""
Coefficients a_ij(p) = rho(|p|^2) delta_ij + 2 rho'(|p|^2) p_i p_j of the
non-divergence form of the potential equation.

For subsonic p the matrix has the simple eigenvalue rho (1 - M^2) along p and
rho with multiplicity n - 1 on the orthogonal complement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gas
from .errors import DomainError

__all__ = [
    "EllipticCoeffs",
    "coeffs_at",
    "coeffs_at_infinity",
    "coeff_matrix",
    "coefficient_differential",
    "lipschitz_estimate",
]


@dataclass(frozen=True)
class EllipticCoeffs:
    a: np.ndarray
    lambda_min: float
    lambda_max: float
    dim: int

    @property
    def eigenvalues(self):
        """Closed-form spectrum, ascending."""
        n = self.dim
        return np.array([self.lambda_min] + [self.lambda_max] * (n - 1))

    def inverse(self):
        return np.linalg.inv(self.a)


def coeff_matrix(gradients, model):
    """Vectorised a_ij for gradients of shape (..., n); returns (..., n, n)."""
    p = np.asarray(gradients, dtype=float)
    q2 = np.sum(p * p, axis=-1)
    rho = np.asarray(gas.density_from_speed(q2, model))
    rp = np.asarray(gas.rho_prime(q2, model))
    n = p.shape[-1]
    eye = np.eye(n)
    outer = p[..., :, None] * p[..., None, :]  # formed first so the result is exactly symmetric
    return rho[..., None, None] * eye + 2.0 * rp[..., None, None] * outer


def coeffs_at(gradient, model):
    p = np.asarray(gradient, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DomainError("gradient must be a vector of dimension >= 2")
    q2 = float(p @ p)
    a = coeff_matrix(p, model)
    rho = float(gas.density_from_speed(q2, model))
    if model.is_incompressible:
        lam = rho
    else:
        c2 = float(gas.sound_speed(rho, model)) ** 2
        lam = rho * (1.0 - q2 / c2)
    return EllipticCoeffs(a=a, lambda_min=lam, lambda_max=rho, dim=p.size)


def coeffs_at_infinity(u_infinity, model):
    """Limit coefficients a_ij(u_inf); rho_bar * I for a fluid at rest."""
    return coeffs_at(u_infinity, model)


def coefficient_differential(p, model):
    """d a_ij / d p_k as an (n, n, n) array indexed [i, j, k]."""
    p = np.asarray(p, dtype=float)
    n = p.size
    q2 = float(p @ p)
    rp = float(gas.rho_prime(q2, model))
    rpp = float(gas.rho_second(q2, model))
    eye = np.eye(n)
    d = 2.0 * rp * eye[:, :, None] * p[None, None, :]
    d += 4.0 * rpp * p[:, None, None] * p[None, :, None] * p[None, None, :]
    d += 2.0 * rp * (eye[:, None, :] * p[None, :, None] + eye[None, :, :] * p[:, None, None])
    return d


def lipschitz_estimate(p1, p2, model):
    """max_ij |a_ij(p1) - a_ij(p2)| / |p1 - p2| and the maximising (i, j)."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    dist = float(np.linalg.norm(p1 - p2))
    if dist == 0.0:
        raise DomainError("Lipschitz ratio is undefined for p1 == p2")
    diff = np.abs(coeff_matrix(p1, model) - coeff_matrix(p2, model))
    k = np.unravel_index(np.argmax(diff), diff.shape)
    return float(diff[k]) / dist, (int(k[0]), int(k[1]))
