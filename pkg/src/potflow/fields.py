"""
Common sampler interface for solver output and closed-form reference fields.

A sampler evaluates the potential difference Phi = phi - phi_inf and the
velocity u = grad(phi) at arbitrary Cartesian points of shape (..., 3).
Post-processing and barrier checks only talk to this interface, so they run
unchanged on discrete and analytic fields.
"""

from __future__ import annotations

import numpy as np

from . import gas

__all__ = ["FieldSampler", "to_spherical", "meridian_to_cartesian", "shell_points"]


def to_spherical(points, center=None):
    """Return (r, theta, azimuth) of points about ``center``; theta from the x_1 axis."""
    x = np.asarray(points, dtype=float)
    if center is not None:
        x = x - np.asarray(center, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.arccos(np.clip(x[..., 0] / r, -1.0, 1.0))
    az = np.arctan2(x[..., 2], x[..., 1])
    return r, theta, az


def meridian_to_cartesian(u_r, u_t, theta, az):
    """Cartesian vector from spherical components of an axisymmetric field."""
    ct, st = np.cos(theta), np.sin(theta)
    axial = u_r * ct - u_t * st
    radial = u_r * st + u_t * ct
    return np.stack([axial, radial * np.cos(az), radial * np.sin(az)], axis=-1)


def shell_points(r, theta_max, n_angles, center=None):
    """Sample points on a meridian arc {|x - center| = r, 0 <= theta <= theta_max}."""
    theta = np.linspace(0.0, theta_max, n_angles)
    pts = np.stack([r * np.cos(theta), r * np.sin(theta), np.zeros_like(theta)], axis=-1)
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


class FieldSampler:
    """Base class; subclasses implement ``phi_diff`` and ``velocity``."""

    dim = 3
    model = None
    theta_max = np.pi
    center = (0.0, 0.0, 0.0)
    u_inf = np.zeros(3)
    incompressible = True

    def phi_diff(self, points):
        raise NotImplementedError

    def velocity(self, points):
        raise NotImplementedError

    def grad_phi_diff(self, points):
        return self.velocity(points) - np.asarray(self.u_inf, dtype=float)

    def speed_error(self, points):
        """|u - u_inf|"""
        return np.linalg.norm(self.grad_phi_diff(points), axis=-1)

    def speed(self, points):
        return np.linalg.norm(self.velocity(points), axis=-1)

    def density(self, points):
        q2 = np.sum(self.velocity(points) ** 2, axis=-1)
        return np.asarray(gas.density_from_speed(q2, self.model))

    def quantity(self, name, points):
        """Named scalar quantity used by decay fits."""
        if name == "speed_error":
            return self.speed_error(points)
        if name == "potential_error":
            return np.abs(self.phi_diff(points))
        if name == "speed":
            return self.speed(points)
        raise ValueError(f"unknown quantity {name!r}")

    def boundary_normal_derivative(self, points):
        """grad(Phi) . n on a sphere about ``center``, n pointing away from the center."""
        x = np.asarray(points, dtype=float) - np.asarray(self.center, dtype=float)
        n = x / np.linalg.norm(x, axis=-1, keepdims=True)
        return np.sum(self.grad_phi_diff(points) * n, axis=-1)

    def shell(self, r, n_angles=181):
        return shell_points(r, self.theta_max, n_angles, self.center)
