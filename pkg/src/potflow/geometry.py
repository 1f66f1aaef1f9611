"""
Axisymmetric far-field domains and their compactified meshes.

Both domain types are meshed in (sigma, theta) with sigma = 1/r, so the point
at infinity becomes the row sigma = 0.  Nodes are vertex centred; every node
with sigma > 0 owns a dual cell bounded by the mid-lines between nodes, which
is what the finite-volume solver integrates over.  Numerics are for n = 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "ExteriorDomain",
    "ConeDomain",
    "AxiMesh",
    "build_exterior_mesh",
    "build_cone_mesh",
    "solid_angle",
    "unit_sphere_area",
]


def unit_sphere_area(n):
    """|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)."""
    return 2.0 * math.pi ** (0.5 * n) / math.gamma(0.5 * n)


@dataclass(frozen=True)
class ExteriorDomain:
    """Exterior of a sphere of radius ``obstacle_radius`` centred at the origin."""

    obstacle_radius: float = 1.0
    dim: int = 3

    def __post_init__(self):
        if not self.obstacle_radius > 0:
            raise ConfigurationError("obstacle radius must be positive")
        if self.dim != 3:
            raise ConfigurationError("meshes are implemented for n = 3 only")


@dataclass(frozen=True)
class ConeDomain:
    """Far-field piece {r >= inner_radius, theta <= half_angle} of a circular cone.

    The axis is x_1, ``vertex`` is the cone apex A_+.
    """

    half_angle: float = math.pi / 6
    inner_radius: float = 1.0
    vertex: tuple = (0.0, 0.0, 0.0)
    dim: int = 3

    def __post_init__(self):
        if not 0.0 < self.half_angle <= 0.5 * math.pi + 1e-15:
            raise ConfigurationError("cone half angle must lie in (0, pi/2]")
        if not self.inner_radius > 0:
            raise ConfigurationError("inner radius must be positive")
        if self.dim != 3 or len(self.vertex) != 3:
            raise ConfigurationError("cones are implemented for n = 3 only")

    def lateral_normal(self, phi):
        """Unit normal of the lateral surface (the theta-hat direction) at azimuth phi."""
        t = self.half_angle
        phi = np.asarray(phi, dtype=float)
        return np.stack(
            [np.full_like(phi, -math.sin(t)), math.cos(t) * np.cos(phi), math.cos(t) * np.sin(phi)],
            axis=-1,
        )


def solid_angle(domain):
    """Area |Sigma_+| of the cone cross-section on the unit sphere (n = 3)."""
    return 2.0 * math.pi * (1.0 - math.cos(domain.half_angle))


@dataclass(frozen=True)
class AxiMesh:
    """Uniform (sigma, theta) grid with finite-volume metric terms.

    ``sigma[i] = i * h`` for i = 0..n_r, ``theta[j] = j * dtheta`` for
    j = 0..n_theta.  Row 0 is the point at infinity; row n_r is the inner
    boundary (obstacle or inflow cap).  Column 0 is the symmetry axis; the
    last column is either the opposite axis (exterior) or the slip wall.
    """

    kind: str
    sigma: np.ndarray
    theta: np.ndarray
    inner_boundary: str
    outer_theta_boundary: str
    domain: object = field(compare=False)

    @property
    def n_r(self):
        return self.sigma.size - 1

    @property
    def n_theta(self):
        return self.theta.size - 1

    @property
    def h(self):
        return float(self.sigma[1] - self.sigma[0])

    @property
    def dtheta(self):
        return float(self.theta[1] - self.theta[0])

    @property
    def sigma_max(self):
        return float(self.sigma[-1])

    @property
    def theta_max(self):
        return float(self.theta[-1])

    @property
    def r(self):
        """Node radii; the sigma = 0 row maps to +inf."""
        with np.errstate(divide="ignore"):
            return 1.0 / self.sigma

    @property
    def theta_faces(self):
        """Dual-cell boundaries in theta, clipped to the domain."""
        t = self.theta
        mid = 0.5 * (t[1:] + t[:-1])
        return np.concatenate([[t[0]], mid, [t[-1]]])

    @property
    def sigma_faces(self):
        s = self.sigma
        mid = 0.5 * (s[1:] + s[:-1])
        return np.concatenate([[s[0]], mid, [s[-1]]])

    @property
    def angular_weights(self):
        """W_j = integral of sin(theta) over the dual cell of column j."""
        tf = self.theta_faces
        return np.cos(tf[:-1]) - np.cos(tf[1:])

    @property
    def radial_lengths(self):
        """Dual-cell extent in sigma (half cells at the two boundary rows)."""
        sf = self.sigma_faces
        return sf[1:] - sf[:-1]

    @property
    def cell_volumes(self):
        """Exact volumes of the dual cells (row 0 is not a cell: inf)."""
        sf = self.sigma_faces
        with np.errstate(divide="ignore"):
            inv3 = sf**-3.0
        radial = (inv3[:-1] - inv3[1:]) / 3.0
        return 2.0 * math.pi * np.outer(radial, self.angular_weights)

    def nodes_xyz(self):
        """Cartesian coordinates of the nodes in the meridian plane x_3 = 0.

        Row 0 (r = inf) holds non-finite entries.
        """
        R, T = np.meshgrid(self.r, self.theta, indexing="ij")
        with np.errstate(invalid="ignore"):
            pts = np.stack([R * np.cos(T), R * np.sin(T), np.zeros_like(R)], axis=-1)
        return pts

    def integrate(self, values, r_min=0.0, r_max=math.inf):
        """Volume integral of nodal ``values`` over r_min <= r <= r_max.

        Dual cells straddling the shell bounds are clipped exactly, so the
        integral of a constant reproduces the shell volume.
        """
        values = np.broadcast_to(np.asarray(values, dtype=float), (self.n_r + 1, self.n_theta + 1))
        s_lo = 0.0 if not math.isfinite(r_max) else 1.0 / r_max
        s_hi = math.inf if r_min <= 0 else 1.0 / r_min
        sf = self.sigma_faces
        lo = np.clip(sf[:-1], s_lo, s_hi)
        hi = np.clip(sf[1:], s_lo, s_hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(hi > lo, (lo**-3.0 - hi**-3.0) / 3.0, 0.0)
        if np.any(~np.isfinite(radial)):
            raise ConfigurationError("integration range must exclude infinity")
        weights = 2.0 * math.pi * np.outer(radial, self.angular_weights)
        return float(np.sum(weights * values))

    def summary(self):
        return {
            "kind": self.kind,
            "n_r": self.n_r,
            "n_theta": self.n_theta,
            "h_sigma": self.h,
            "dtheta": self.dtheta,
            "sigma_max": self.sigma_max,
            "theta_max": self.theta_max,
            "inner_boundary": self.inner_boundary,
            "outer_theta_boundary": self.outer_theta_boundary,
        }

    def to_csv(self, path):
        pts = self.nodes_xyz()
        R, T = np.meshgrid(self.r, self.theta, indexing="ij")
        S, _ = np.meshgrid(self.sigma, self.theta, indexing="ij")
        data = np.column_stack([S.ravel(), T.ravel(), R.ravel(), pts[..., 0].ravel(), pts[..., 1].ravel()])
        np.savetxt(path, data, delimiter=",", header="sigma,theta,r,x1,x2", comments="")


def _check_sizes(n_r, n_theta):
    if int(n_r) != n_r or int(n_theta) != n_theta or n_r < 8 or n_theta < 8:
        raise ConfigurationError("mesh sizes must be integers >= 8")


def build_exterior_mesh(domain, n_r, n_theta):
    """Mesh of r in [a, inf) x theta in [0, pi]."""
    _check_sizes(n_r, n_theta)
    sigma = np.linspace(0.0, 1.0 / domain.obstacle_radius, int(n_r) + 1)
    theta = np.linspace(0.0, math.pi, int(n_theta) + 1)
    return AxiMesh("exterior", sigma, theta, "slip", "axis", domain)


def build_cone_mesh(domain, n_r, n_theta):
    """Mesh of r in [R_in, inf) x theta in [0, theta_0] (coordinates relative to the vertex)."""
    _check_sizes(n_r, n_theta)
    if not 0.0 < domain.half_angle <= 0.5 * math.pi + 1e-15:
        raise ConfigurationError("cone half angle must lie in (0, pi/2]")
    sigma = np.linspace(0.0, 1.0 / domain.inner_radius, int(n_r) + 1)
    theta = np.linspace(0.0, domain.half_angle, int(n_theta) + 1)
    return AxiMesh("cone", sigma, theta, "inflow", "slip", domain)
