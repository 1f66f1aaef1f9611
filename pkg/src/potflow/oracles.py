"""
Closed-form reference flows and the flux-based optimality certificate.

* sphere dipole: incompressible flow past a ball, Phi = U a^n x_1 / ((n-1)|x|^n)
* radial cone flow: rho(q^2) q |Sigma_+| r^{n-1} = m on the subsonic branch
* point source: phi = -m / (rho_bar (n-2) |S^{n-1}|) |x|^{2-n}

Each has a FieldSampler wrapper so post-processing treats it like solver output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import gas
from .errors import ConservationError, DomainError, InfeasibleFluxError, SingularPointError
from .fields import FieldSampler, to_spherical
from .geometry import solid_angle, unit_sphere_area

__all__ = [
    "sphere_dipole",
    "SphereDipoleField",
    "radial_cone_flow",
    "RadialConeField",
    "point_source",
    "PointSourceField",
    "point_source_flux",
    "shell_flux",
    "OptimalityCertificate",
    "optimality_certificate",
    "inverse_distance_derivatives",
    "PlantedMultipoleField",
]


def sphere_dipole(U, a, n, x):
    """Potential and velocity of uniform flow U e_1 past the ball |x| <= a."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < a * (1 - 1e-12)):
        raise DomainError("sphere_dipole is defined for |x| >= a")
    k = a**n / (n - 1)
    x1 = x[..., 0]
    phi = U * x1 * (1.0 + k * r**-n)
    grad = -U * k * n * (x1 * r ** (-n - 2))[..., None] * x
    grad[..., 0] += U * (1.0 + k * r**-n)
    return phi, grad


class SphereDipoleField(FieldSampler):
    """Exact incompressible sphere flow; ``center`` shifts the sphere."""

    def __init__(self, U=1.0, a=1.0, rho_bar=1.0, center=(0.0, 0.0, 0.0)):
        self.U = float(U)
        self.obstacle_radius = float(a)
        self.model = gas.GasModel.incompressible(rho_bar)
        self.u_inf = np.array([self.U, 0.0, 0.0])
        self.center = tuple(float(c) for c in center)
        self.theta_max = math.pi
        self.incompressible = True

    def _local(self, points):
        return np.asarray(points, dtype=float) - np.asarray(self.center)

    def phi_diff(self, points):
        x = self._local(points)
        r = np.linalg.norm(x, axis=-1)
        if np.any(r < self.obstacle_radius * (1 - 1e-12)):
            raise DomainError("sample inside the obstacle")
        return 0.5 * self.U * self.obstacle_radius**3 * x[..., 0] / r**3

    def velocity(self, points):
        return sphere_dipole(self.U, self.obstacle_radius, 3, self._local(points))[1]

    def dipole_coefficient(self):
        """G_1 in Phi = G_1 d/dx_1 |x|^{-1}."""
        return -0.5 * self.U * self.obstacle_radius**3


def inverse_distance_derivatives(x, order):
    """Cartesian derivative tensor of |x|^-1 of the given order (0..4), n = 3."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularPointError("|x|^-1 is singular at the origin")
    d = np.eye(3)
    if order == 0:
        return 1.0 / r
    if order == 1:
        return -x * (r**-3)[..., None]
    if order == 2:
        return 3 * np.einsum("...i,...j->...ij", x, x) * (r**-5)[..., None, None] - d * (r**-3)[..., None, None]
    if order == 3:
        xxx = np.einsum("...i,...j,...k->...ijk", x, x, x)
        sym = np.einsum("ij,...k->...ijk", d, x) + np.einsum("ik,...j->...ijk", d, x) + np.einsum("jk,...i->...ijk", d, x)
        return -15 * xxx * (r**-7)[..., None, None, None] + 3 * sym * (r**-5)[..., None, None, None]
    if order == 4:
        xxxx = np.einsum("...i,...j,...k,...l->...ijkl", x, x, x, x)
        xx = np.einsum("...i,...j->...ij", x, x)
        pairs = (
            np.einsum("ij,...kl->...ijkl", d, xx) + np.einsum("ik,...jl->...ijkl", d, xx)
            + np.einsum("il,...jk->...ijkl", d, xx) + np.einsum("jk,...il->...ijkl", d, xx)
            + np.einsum("jl,...ik->...ijkl", d, xx) + np.einsum("kl,...ij->...ijkl", d, xx)
        )
        dd = np.einsum("ij,kl->ijkl", d, d) + np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d)
        s5 = (r**-5)[..., None, None, None, None]
        s7 = (r**-7)[..., None, None, None, None]
        s9 = (r**-9)[..., None, None, None, None]
        return 105 * xxxx * s9 - 15 * pairs * s7 + 3 * dd * s5
    raise ValueError("order must be between 0 and 4")


class PlantedMultipoleField(FieldSampler):
    """Phi = G r^-1 + G_i d_i r^-1 + G_ij d_ij r^-1 + T_ijk d_ijk r^-1, harmonic for r > 0.

    Not a slip flow in general; used to test extraction and remainder fits
    with known coefficients.
    """

    def __init__(self, G=0.0, G_i=(0.0, 0.0, 0.0), G_ij=None, T_ijk=None, U=1.0, obstacle_radius=1.0):
        self.G = float(G)
        self.G_i = np.asarray(G_i, dtype=float)
        self.G_ij = np.zeros((3, 3)) if G_ij is None else np.asarray(G_ij, dtype=float)
        self.T_ijk = np.zeros((3, 3, 3)) if T_ijk is None else np.asarray(T_ijk, dtype=float)
        self.U = float(U)
        self.obstacle_radius = float(obstacle_radius)
        self.model = gas.GasModel.incompressible(1.0)
        self.u_inf = np.array([self.U, 0.0, 0.0])
        self.theta_max = math.pi
        self.incompressible = True

    def phi_diff(self, points):
        x = np.asarray(points, dtype=float)
        val = self.G * inverse_distance_derivatives(x, 0)
        val = val + np.einsum("...i,i->...", inverse_distance_derivatives(x, 1), self.G_i)
        val = val + np.einsum("...ij,ij->...", inverse_distance_derivatives(x, 2), self.G_ij)
        return val + np.einsum("...ijk,ijk->...", inverse_distance_derivatives(x, 3), self.T_ijk)

    def grad_phi_diff(self, points):
        x = np.asarray(points, dtype=float)
        g = self.G * inverse_distance_derivatives(x, 1)
        g = g + np.einsum("...ik,i->...k", inverse_distance_derivatives(x, 2), self.G_i)
        g = g + np.einsum("...ijk,ij->...k", inverse_distance_derivatives(x, 3), self.G_ij)
        return g + np.einsum("...ijkl,ijk->...l", inverse_distance_derivatives(x, 4), self.T_ijk)

    def velocity(self, points):
        return self.grad_phi_diff(points) + self.u_inf


def _sonic_bounds(model):
    qmax = (1.0 - model.delta) * gas.critical_speed(model)
    plain = model.with_delta(0.0)
    top = qmax * (1.0 - 1e-14)
    return plain, top, float(gas.density_from_speed(top * top, plain)) * top


def radial_cone_flow(m, domain, model, r):
    """Subsonic speed q(r) with rho(q^2) q |Sigma_+| r^2 = m (n = 3).

    rho(q^2) q is increasing on the subsonic branch, so bisection on
    [0, (1 - delta) q_cr] yields the unique root.
    """
    if not m > 0:
        raise DomainError("mass flux must be positive")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr <= 0):
        raise DomainError("radius must be positive")
    target = m / (solid_angle(domain) * r_arr**2)
    if model.is_incompressible:
        q = target / model.rho_bar
        return float(q[0]) if np.ndim(r) == 0 else q
    plain, top, fmax = _sonic_bounds(model)
    if np.any(target >= fmax):
        raise InfeasibleFluxError(
            f"flux density {float(np.max(target)):.4g} exceeds the subsonic maximum {fmax:.4g}"
        )
    out = np.empty_like(target)
    for k, t in enumerate(target):
        out[k] = optimize.bisect(
            lambda q: float(gas.density_from_speed(q * q, plain)) * q - t,
            0.0, top, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000,
        )
    return float(out[0]) if np.ndim(r) == 0 else out


class RadialConeField(FieldSampler):
    """Purely radial nozzle flow from the cone vertex, phi(inf) = 0."""

    def __init__(self, m, domain, model):
        self.m = float(m)
        self.domain = domain
        self.model = model
        self.center = tuple(domain.vertex)
        self.theta_max = domain.half_angle
        self.u_inf = np.zeros(3)
        self.incompressible = model.is_incompressible

    def speed_at(self, r):
        return radial_cone_flow(self.m, self.domain, self.model, r)

    def _potential_1d(self, r):
        if self.model.is_incompressible:
            return -self.m / (self.model.rho_bar * solid_angle(self.domain) * r)
        # phi(r) = -int_r^inf q(s) ds, with s = r / t mapping to t in (0, 1]
        val, _ = integrate.quad(lambda t: self.speed_at(r / t) * r / t**2, 0.0, 1.0,
                                epsabs=0.0, epsrel=1e-12, limit=200)
        return -val

    def phi_diff(self, points):
        r, _, _ = to_spherical(points, self.center)
        flat = np.atleast_1d(r).ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = np.array([self._potential_1d(x) for x in uniq])
        return vals[inv].reshape(np.shape(r))

    def velocity(self, points):
        x = np.asarray(points, dtype=float) - np.asarray(self.center)
        r = np.linalg.norm(x, axis=-1)
        if np.any(r == 0):
            raise SingularPointError("radial flow is singular at the vertex")
        q = np.asarray(self.speed_at(r)).reshape(r.shape)
        return (q / r)[..., None] * x


def point_source(m, model, n, x):
    """(phi, grad phi) of an incompressible point source of mass flux m."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularPointError("point source is singular at the origin")
    rho_bar = model.rho_bar if model is not None else 1.0
    s = unit_sphere_area(n)
    phi = -m / (rho_bar * (n - 2) * s) * r ** (2.0 - n)
    grad = (m / (rho_bar * s)) * (r**-n)[..., None] * x
    return phi, grad


class PointSourceField(FieldSampler):
    def __init__(self, m, rho_bar=1.0, obstacle_radius=1.0):
        self.m = float(m)
        self.model = gas.GasModel.incompressible(rho_bar)
        self.obstacle_radius = obstacle_radius
        self.u_inf = np.zeros(3)
        self.theta_max = math.pi
        self.incompressible = True

    def phi_diff(self, points):
        return point_source(self.m, self.model, 3, points)[0]

    def velocity(self, points):
        return point_source(self.m, self.model, 3, points)[1]


def _theta_rule(theta_max, n_theta):
    """Gauss-Legendre nodes/weights on [0, theta_max]."""
    x, w = np.polynomial.legendre.leggauss(n_theta)
    return 0.5 * theta_max * (x + 1.0), 0.5 * theta_max * w


def shell_flux(sampler, R, n_theta=64, rule="gauss"):
    """Mass flux 2 pi int rho grad(phi) . r_hat R^2 sin(theta) dtheta over S_R.

    ``rule`` is "gauss" (Gauss-Legendre) or "trapezoid" (uniform nodes).
    """
    tmax = sampler.theta_max
    if rule == "gauss":
        th, w = _theta_rule(tmax, n_theta)
    else:
        th = np.linspace(0.0, tmax, n_theta + 1)
        w = np.full(th.size, tmax / n_theta)
        w[[0, -1]] *= 0.5
    c = np.asarray(sampler.center, dtype=float)
    pts = c + np.stack([R * np.cos(th), R * np.sin(th), np.zeros_like(th)], axis=-1)
    u = sampler.velocity(pts)
    normal = (pts - c) / R
    rho = np.asarray(sampler.density(pts))
    flux_density = rho * np.sum(u * normal, axis=-1)
    return 2.0 * math.pi * R * R * float(np.sum(w * flux_density * np.sin(th)))


def point_source_flux(m, R, n_theta=64, rho_bar=1.0):
    """Trapezoid-rule flux of the point source over |x| = R."""
    return shell_flux(PointSourceField(m, rho_bar), R, n_theta, rule="trapezoid")


@dataclass
class OptimalityCertificate:
    mass_flux: float
    density_bound: float
    tolerance: float
    shells: list = field(default_factory=list)
    passed: bool = False
    vacuous: bool = False

    def to_dict(self):
        return dict(self.__dict__)


def optimality_certificate(sampler, domain, m, shells, density_bound=None, tolerance=1e-6,
                           n_theta=128):
    """Mean-value lower bound Lambda |grad phi(x_R)| >= m / |Sigma_+| R^{1-n} on each shell.

    For every radius R the shell flux is compared with m (relative
    ``tolerance``); the sample maximising rho grad(phi) . l is exhibited as
    x_R.  ``density_bound`` defaults to the density at rest, an upper bound
    for rho on every subsonic flow.
    """
    model = sampler.model
    if density_bound is None:
        density_bound = model.rho_bar if model.is_incompressible else float(gas.density_from_speed(0.0, model))
    area = solid_angle(domain)
    cert = OptimalityCertificate(mass_flux=float(m), density_bound=float(density_bound), tolerance=tolerance)
    if m == 0:
        cert.vacuous = True
        cert.passed = True
    c = np.asarray(sampler.center, dtype=float)
    ok = True
    for R in shells:
        flux = shell_flux(sampler, R, n_theta)
        err = abs(flux - m)
        scale = max(abs(m), 1e-300)
        if m != 0 and err > tolerance * scale:
            raise ConservationError(f"shell flux {flux:.10g} at R={R:g} differs from m={m:.10g}")
        th = np.linspace(0.0, sampler.theta_max, n_theta + 1)
        pts = c + np.stack([R * np.cos(th), R * np.sin(th), np.zeros_like(th)], axis=-1)
        u = sampler.velocity(pts)
        rho = np.asarray(sampler.density(pts))
        normal_flux = rho * np.sum(u * (pts - c) / R, axis=-1)
        k = int(np.argmax(normal_flux))
        lower = m / area * R ** (1 - 3)
        lam_grad = density_bound * float(np.linalg.norm(u[k]))
        margin = lam_grad - lower
        ok = ok and margin >= 0
        cert.shells.append(
            {
                "R": float(R),
                "flux": flux,
                "flux_error": err,
                "x_bar": pts[k].tolist(),
                "rho_u_dot_l": float(normal_flux[k]),
                "lower_bound": lower,
                "lambda_grad": lam_grad,
                "margin": margin,
            }
        )
    if not cert.vacuous:
        cert.passed = bool(ok)
    return cert
