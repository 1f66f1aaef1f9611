"""
Finite-volume Picard solver for div(rho(|grad phi|^2) grad phi) = 0.

The unknown is the potential difference Phi = phi - u_inf . x on a compactified
(sigma = 1/r, theta) mesh.  The row sigma = 0 carries the exact far-field
condition Phi = 0.  Each Picard step freezes the density at the current
gradients and solves a symmetric positive-definite linear system.

Fluxes are written per radian of azimuth.  Around node (i, j) the dual cell is
{sigma in [sigma_{i-1/2}, sigma_{i+1/2}], theta in [theta_{j-1/2}, theta_{j+1/2}]};
with r^2 d_r phi = -d_sigma phi the radial-face flux is rho * d_sigma(Phi) * W_j,
W_j = cos(theta_{j-1/2}) - cos(theta_{j+1/2}), and the conical-face flux is
rho * sin(theta_f) * d_theta(Phi) * int sigma^-2 dsigma.  The free-stream part
u_inf . x is not discretised; its face fluxes are integrated exactly.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RectBivariateSpline

from . import gas
from .errors import (
    ConfigurationError,
    InfeasibleFluxError,
    LinearSolveError,
    NonConvergenceError,
    NotSubsonicError,
)
from .fields import FieldSampler, meridian_to_cartesian, to_spherical
from .geometry import build_cone_mesh, build_exterior_mesh, solid_angle

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "FlowField",
    "solve_airfoil",
    "solve_nozzle",
    "picard_step",
    "discrete_residual",
    "face_fluxes",
    "uniform_inflow",
    "perturbed_inflow",
]


@dataclass(frozen=True)
class SolverConfig:
    max_picard_iters: int = 80
    picard_tolerance: float = 1e-10
    relaxation: float = 1.0
    subsonic_margin: float = 0.05
    linear_tolerance: float = None
    linear_solver: str = "cg"
    max_linear_iters: int = 50000
    divergence_window: int = 5

    def __post_init__(self):
        if not self.picard_tolerance > 0:
            raise ConfigurationError("picard_tolerance must be positive")
        if self.linear_tolerance is not None and not self.linear_tolerance > 0:
            raise ConfigurationError("linear_tolerance must be positive")
        if not 0.0 < self.relaxation <= 1.0:
            raise ConfigurationError("relaxation must lie in (0, 1]")
        if not 0.0 < self.subsonic_margin < 1.0:
            raise ConfigurationError("subsonic_margin must lie in (0, 1)")
        if self.linear_solver not in ("cg", "direct"):
            raise ConfigurationError("linear_solver must be 'cg' or 'direct'")
        if self.max_picard_iters < 1:
            raise ConfigurationError("max_picard_iters must be >= 1")

    @property
    def linear_rtol(self):
        if self.linear_tolerance is not None:
            return self.linear_tolerance
        return self.picard_tolerance / 10.0

    def to_dict(self):
        return {
            "max_picard_iters": self.max_picard_iters,
            "picard_tolerance": self.picard_tolerance,
            "relaxation": self.relaxation,
            "subsonic_margin": self.subsonic_margin,
            "linear_tolerance": self.linear_rtol,
            "linear_solver": self.linear_solver,
        }


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


# ---------------------------------------------------------------------------
# nodal derived quantities


def nodal_gradient(mesh, phi):
    """Central-difference (d_sigma Phi, d_theta Phi) at every node."""
    h, dt = mesh.h, mesh.dtheta
    ds = np.zeros_like(phi)
    ds[1:-1] = (phi[2:] - phi[:-2]) / (2.0 * h)
    ds[-1] = (3.0 * phi[-1] - 4.0 * phi[-2] + phi[-3]) / (2.0 * h)
    dth = np.zeros_like(phi)
    # theta = 0 axis and the last column (axis or slip wall) have d_theta = 0
    dth[:, 1:-1] = (phi[:, 2:] - phi[:, :-2]) / (2.0 * dt)
    ds[0] = 0.0
    return ds, dth


def nodal_velocity(mesh, phi, U, slip_inner=False):
    """Spherical velocity components (u_r, u_theta) of the full potential."""
    ds, dth = nodal_gradient(mesh, phi)
    s = mesh.sigma[:, None]
    t = mesh.theta[None, :]
    u_r = U * np.cos(t) - s * s * ds
    u_t = -U * np.sin(t) + s * dth
    if slip_inner:
        u_r[-1] = 0.0
    return u_r, u_t


def _clamped_density(q2, model, margin):
    if model.is_incompressible:
        return np.full_like(q2, model.rho_bar)
    qmax = (1.0 - margin) * gas.critical_speed(model)
    # the clamp itself is the limit; evaluate strictly below it
    q2c = np.minimum(q2, (qmax * qmax) * (1.0 - 1e-12))
    plain = model.with_delta(0.0)
    return np.asarray(gas.density_from_speed(q2c, plain))


# ---------------------------------------------------------------------------
# assembly


def _assemble(mesh, rho, U, rho_ref, inflow):
    """Return (A, b) for the interior unknowns (rows 1..n_r)."""
    nr, nt = mesh.n_r, mesh.n_theta
    ncol = nt + 1
    h, dt = mesh.h, mesh.dtheta
    W = mesh.angular_weights
    tf = mesh.theta_faces
    sf = mesh.sigma_faces
    sig = mesh.sigma
    dsig = mesh.radial_lengths

    def idx(i, j):
        return (i - 1) * ncol + j

    rows, cols, vals = [], [], []
    diag = np.zeros(nr * ncol)
    b = np.zeros(nr * ncol)

    # radial faces between rows i and i+1
    rho_sf = _harmonic(rho[:-1], rho[1:])  # (nr, ncol)
    c_s = rho_sf * W[None, :] / h
    jj = np.arange(ncol)
    for i in range(nr):
        c = c_s[i]
        if i >= 1:
            k0 = idx(i, jj)
            diag[k0] += c
        k1 = idx(i + 1, jj)
        diag[k1] += c
        if i >= 1:
            rows.extend([k0, k1])
            cols.extend([k1, k0])
            vals.extend([-c, -c])

    # conical faces between columns j and j+1 of row i
    rho_tf = _harmonic(rho[:, :-1], rho[:, 1:])  # (nr+1, nt)
    s_face = np.sin(0.5 * (mesh.theta[:-1] + mesh.theta[1:]))
    jf = np.arange(nt)
    for i in range(1, nr + 1):
        length = dsig[i] / sig[i] ** 2
        c = rho_tf[i] * s_face * length / dt
        ka, kb = idx(i, jf), idx(i, jf + 1)
        diag[ka] += c
        diag[kb] += c
        rows.extend([ka, kb])
        cols.extend([kb, ka])
        vals.extend([-c, -c])

    if U != 0.0:
        # free-stream outflow; uses sum of exact fluxes over a closed cell = 0,
        # so only density differences and the omitted obstacle face remain
        drs = rho_sf - rho_ref
        ring = 0.5 * U * (np.sin(tf[1:]) ** 2 - np.sin(tf[:-1]) ** 2)  # (ncol,)
        with np.errstate(divide="ignore"):
            rf2 = 1.0 / sf[1:-1] ** 2  # radii^2 of faces i+1/2, i = 0..nr-1
        for i in range(nr):
            term = drs[i] * rf2[i] * ring
            # face i+1/2 is the inward face of row i+1 (outward normal -r_hat ... seen from row i+1: +r_hat)
            b[idx(i + 1, jj)] += term
            if i >= 1:
                b[idx(i, jj)] -= term
        drt = rho_tf - rho_ref
        sin2 = np.sin(0.5 * (mesh.theta[:-1] + mesh.theta[1:])) ** 2
        s_lo = sf[:-1]
        s_hi = sf[1:]
        with np.errstate(divide="ignore"):
            r_b2 = np.where(s_lo > 0, 1.0 / np.where(s_lo > 0, s_lo, 1.0) ** 2, np.inf)
        r_a2 = 1.0 / s_hi**2
        for i in range(1, nr + 1):
            span = 0.5 * U * sin2 * (r_b2[i] - r_a2[i])
            term = drt[i] * span
            b[idx(i, jf)] -= term
            b[idx(i, jf + 1)] += term
        # obstacle face carries zero total flux: remove the reference free stream there
        a2 = 1.0 / sig[-1] ** 2
        b[idx(nr, jj)] += rho_ref * a2 * ring

    if inflow is not None:
        r_in2 = 1.0 / sig[-1] ** 2
        b[idx(nr, jj)] -= inflow * r_in2 * W

    n = nr * ncol
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return A, b


def _solve_linear(A, b, x0, cfg):
    if cfg.linear_solver == "direct":
        x = spla.spsolve(A.tocsc(), b)
        res = np.linalg.norm(A @ x - b)
        return x, 1, res
    dinv = 1.0 / A.diagonal()
    M = spla.LinearOperator(A.shape, matvec=lambda v: dinv * v)
    count = [0]

    def cb(_):
        count[0] += 1

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x, info = spla.cg(
        A, b, x0=x0, rtol=cfg.linear_rtol, atol=0.0, maxiter=cfg.max_linear_iters, M=M, callback=cb
    )
    res = np.linalg.norm(A @ x - b)
    if info != 0 or not np.all(np.isfinite(x)):
        raise LinearSolveError(
            f"CG failed (info={info}) with relative residual {res / bnorm:.3e}", residual=res
        )
    return x, count[0], res


# ---------------------------------------------------------------------------
# flow field


class FlowField(FieldSampler):
    """Discrete solution on an AxiMesh; also a FieldSampler.

    ``phi`` holds Phi = phi - u_inf . x at the nodes, shape (n_r + 1, n_theta + 1).
    Derived nodal arrays: ``u_r``, ``u_theta``, ``q2``, ``rho``, ``mach``.
    """

    def __init__(self, mesh, phi, model, U, mode, cfg, inflow=None, history=None,
                 linear_iterations=None, converged=False):
        self.mesh = mesh
        self.phi = np.array(phi, dtype=float)
        self.phi[0] = 0.0
        self.model = model
        self.U = float(U)
        self.mode = mode
        self.cfg = cfg
        self.inflow = inflow
        self.history = list(history or [])
        self.linear_iterations = list(linear_iterations or [])
        self.converged = converged
        slip = mode == "airfoil"
        self.u_r, self.u_theta = nodal_velocity(mesh, self.phi, self.U, slip_inner=slip)
        self.q2 = self.u_r**2 + self.u_theta**2
        self.rho = _clamped_density(self.q2, model, cfg.subsonic_margin)
        if model.is_incompressible:
            self.mach = np.zeros_like(self.q2)
        else:
            self.mach = np.sqrt(self.q2) / np.asarray(gas.sound_speed(self.rho, model))
        self.theta_max = mesh.theta_max
        self.u_inf = np.array([self.U, 0.0, 0.0])
        self.incompressible = model.is_incompressible
        self.center = tuple(mesh.domain.vertex) if mesh.kind == "cone" else (0.0, 0.0, 0.0)
        self._spline = None

    # -- sampler interface ------------------------------------------------
    @property
    def spline(self):
        if self._spline is None:
            self._spline = RectBivariateSpline(self.mesh.sigma, self.mesh.theta, self.phi, kx=3, ky=3)
        return self._spline

    def _coords(self, points):
        r, theta, az = to_spherical(points, self.center)
        sigma = 1.0 / r
        if np.any(sigma > self.mesh.sigma_max * (1 + 1e-12)) or np.any(theta > self.theta_max + 1e-12):
            raise ValueError("sample point outside the meshed domain")
        return sigma, np.minimum(theta, self.theta_max), az

    def phi_diff(self, points):
        sigma, theta, _ = self._coords(points)
        return self.spline.ev(sigma, theta)

    def velocity(self, points):
        sigma, theta, az = self._coords(points)
        d_s = self.spline.ev(sigma, theta, dx=1)
        d_t = self.spline.ev(sigma, theta, dy=1)
        u_r = self.U * np.cos(theta) - sigma**2 * d_s
        u_t = -self.U * np.sin(theta) + sigma * d_t
        return meridian_to_cartesian(u_r, u_t, theta, az)

    def density(self, points):
        q2 = np.sum(self.velocity(points) ** 2, axis=-1)
        return _clamped_density(q2, self.model, self.cfg.subsonic_margin)

    @property
    def obstacle_radius(self):
        return 1.0 / self.mesh.sigma_max

    def boundary_normal_derivative(self, points):
        """On the obstacle the slip condition fixes grad(Phi) . n = -U n_1."""
        if self.mode != "airfoil":
            return super().boundary_normal_derivative(points)
        x = np.asarray(points, dtype=float)
        return -self.U * x[..., 0] / np.linalg.norm(x, axis=-1)

    def resolved_range(self):
        """(r_min, r_max) excluding the obstacle layer and the two outermost rows."""
        return 1.0 / self.mesh.sigma_max, 1.0 / (2.0 * self.mesh.h)

    # -- diagnostics ------------------------------------------------------
    @property
    def max_speed(self):
        return float(np.sqrt(np.max(self.q2)))

    def speed_error_nodes(self):
        t = self.mesh.theta[None, :]
        du_r = self.u_r - self.U * np.cos(t)
        du_t = self.u_theta + self.U * np.sin(t)
        return np.sqrt(du_r**2 + du_t**2)

    def summary(self):
        out = {
            "mode": self.mode,
            "gas": self.model.to_dict(),
            "u_inf": self.U,
            "mesh": self.mesh.summary(),
            "solver": self.cfg.to_dict(),
            "converged": self.converged,
            "picard_iterations": len(self.history),
            "update_history": list(self.history),
            "linear_iterations": list(self.linear_iterations),
            "discrete_residual": discrete_residual(self),
            "max_speed": self.max_speed,
            "max_mach": float(np.max(self.mach)),
        }
        if self.mode == "nozzle":
            fluxes = face_fluxes(self)
            m = 2.0 * math.pi * float(np.sum(self.inflow * self.mesh.angular_weights)) / self.mesh.sigma_max**2
            out["mass_flux"] = m
            out["flux_error"] = float(np.max(np.abs(fluxes - m)))
        return out

    def write_csv(self, path):
        R = np.broadcast_to(self.mesh.r[:, None], self.phi.shape)
        T = np.broadcast_to(self.mesh.theta[None, :], self.phi.shape)
        data = np.column_stack(
            [R.ravel(), T.ravel(), self.phi.ravel(), self.speed_error_nodes().ravel(),
             self.rho.ravel(), self.mach.ravel()]
        )
        np.savetxt(path, data, delimiter=",", header="r,theta,phi_diff,speed_error,rho,mach", comments="")

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def _rho_ref(model, U, margin):
    return float(_clamped_density(np.array(U * U), model, margin))


def picard_step(field, cfg=None):
    """One frozen-density step; returns (new_field, L_inf update)."""
    cfg = cfg or field.cfg
    mesh = field.mesh
    rho_ref = _rho_ref(field.model, field.U, cfg.subsonic_margin)
    A, b = _assemble(mesh, field.rho, field.U, rho_ref, field.inflow)
    x0 = field.phi[1:].ravel()
    x, its, _ = _solve_linear(A, b, x0, cfg)
    new = np.zeros_like(field.phi)
    new[1:] = x.reshape(mesh.n_r, mesh.n_theta + 1)
    new = cfg.relaxation * new + (1.0 - cfg.relaxation) * field.phi
    update = float(np.max(np.abs(new - field.phi)))
    out = FlowField(mesh, new, field.model, field.U, field.mode, cfg, field.inflow,
                    list(field.history) + [update], list(field.linear_iterations) + [its])
    return out, update


def _iterate(field, cfg):
    window = 0
    prev = math.inf
    for k in range(cfg.max_picard_iters):
        field, update = picard_step(field, cfg)
        log.debug("picard %d: update %.3e", k + 1, update)
        if not math.isfinite(update):
            raise NonConvergenceError("Picard update is not finite", field.history)
        if update < cfg.picard_tolerance:
            field.converged = True
            break
        window = window + 1 if update > prev else 0
        if window >= cfg.divergence_window:
            raise NonConvergenceError(
                f"Picard update grew for {window} consecutive steps", field.history
            )
        prev = update
    else:
        raise NonConvergenceError(
            f"no convergence in {cfg.max_picard_iters} Picard steps", field.history
        )
    if not field.model.is_incompressible:
        qmax = (1.0 - cfg.subsonic_margin) * gas.critical_speed(field.model)
        if field.max_speed >= qmax:
            raise NotSubsonicError(
                f"converged speed {field.max_speed:.4f} reaches the subsonic clamp {qmax:.4f}"
            )
    return field


def solve_airfoil(domain, model, u_infinity, n_r, n_theta, cfg=None):
    """Flow past a sphere with slip, Phi = 0 at infinity.

    ``u_infinity`` is either the scalar q_1^inf or a vector aligned with x_1.
    """
    cfg = cfg or SolverConfig()
    u = np.atleast_1d(np.asarray(u_infinity, dtype=float))
    if u.size > 1 and np.any(u[1:] != 0.0):
        raise ConfigurationError("u_infinity must be aligned with the x_1 axis")
    U = float(u[0])
    if not model.is_incompressible:
        qmax = (1.0 - cfg.subsonic_margin) * gas.critical_speed(model)
        if abs(U) >= qmax:
            raise NotSubsonicError(f"|u_inf| = {abs(U):.4f} not below (1-delta) q_cr = {qmax:.4f}")
    mesh = build_exterior_mesh(domain, n_r, n_theta)
    field = FlowField(mesh, np.zeros((mesh.n_r + 1, mesh.n_theta + 1)), model, U, "airfoil", cfg)
    if U == 0.0:
        field.history.append(0.0)
        field.converged = True
        return field
    return _iterate(field, cfg)


def uniform_inflow(domain, m, mesh):
    """Radial inflow density g = m / (|Sigma_+| R_in^2) at every cap node."""
    g = m / (solid_angle(domain) * domain.inner_radius**2)
    return np.full(mesh.n_theta + 1, g)


def perturbed_inflow(domain, m, mesh, amplitude=0.1):
    """Radial inflow plus a zero-flux cos(pi theta / theta_0) perturbation."""
    g0 = m / (solid_angle(domain) * domain.inner_radius**2)
    shape = np.cos(math.pi * mesh.theta / domain.half_angle)
    W = mesh.angular_weights
    shape = shape - np.sum(shape * W) / np.sum(W)
    return g0 * (1.0 + amplitude * shape)


def solve_nozzle(domain, model, mass_flux, n_r, n_theta, cfg=None, inflow=None):
    """Cone far field with slip walls and prescribed inflow rho d_r phi = g at r = R_in.

    ``inflow`` is a callable mesh -> g array, an array of nodal values, or
    None for uniform radial inflow carrying ``mass_flux``.
    """
    cfg = cfg or SolverConfig()
    mesh = build_cone_mesh(domain, n_r, n_theta)
    if inflow is None:
        g = uniform_inflow(domain, mass_flux, mesh)
    elif callable(inflow):
        g = np.asarray(inflow(mesh), dtype=float)
    else:
        g = np.asarray(inflow, dtype=float)
    if g.shape != (mesh.n_theta + 1,):
        raise ConfigurationError("inflow profile must have one value per angular node")
    m_discrete = 2.0 * math.pi * float(np.sum(g * mesh.angular_weights)) * domain.inner_radius**2
    if mass_flux is not None and not math.isclose(m_discrete, mass_flux, rel_tol=1e-9, abs_tol=1e-14):
        raise ConfigurationError(
            f"inflow profile carries flux {m_discrete:.6g}, expected {mass_flux:.6g}"
        )
    if not model.is_incompressible:
        qmax = (1.0 - cfg.subsonic_margin) * gas.critical_speed(model)
        limit = float(gas.density_from_speed(qmax * qmax * (1 - 1e-12), model.with_delta(0.0))) * qmax
        if np.max(np.abs(g)) >= limit:
            raise InfeasibleFluxError(
                f"inflow mass flux density {np.max(np.abs(g)):.4g} exceeds subsonic limit {limit:.4g}"
            )
    field = FlowField(mesh, np.zeros((mesh.n_r + 1, mesh.n_theta + 1)), model, 0.0, "nozzle", cfg, g)
    if not np.any(g):
        field.history.append(0.0)
        field.converged = True
        return field
    return _iterate(field, cfg)


def face_fluxes(field):
    """Total mass flux (2 pi included) through every radial face sigma_{i+1/2}.

    For nozzle fields these all equal m up to the linear-solver tolerance.
    Entry i is the face between rows i and i+1 (outward, i.e. towards larger r).
    """
    mesh = field.mesh
    rho_sf = _harmonic(field.rho[:-1], field.rho[1:])
    dphi = (field.phi[1:] - field.phi[:-1]) / mesh.h
    W = mesh.angular_weights
    # flux towards larger r equals -(rho d_sigma Phi W), written per sigma face
    flux = -np.sum(rho_sf * dphi * W[None, :], axis=1)
    if field.U != 0.0:
        rho_ref = _rho_ref(field.model, field.U, field.cfg.subsonic_margin)
        tf = mesh.theta_faces
        ring = 0.5 * field.U * (np.sin(tf[1:]) ** 2 - np.sin(tf[:-1]) ** 2)
        with np.errstate(divide="ignore"):
            rf2 = 1.0 / mesh.sigma_faces[1:-1] ** 2
        flux = flux + np.sum((rho_sf) * ring[None, :], axis=1) * rf2
    return 2.0 * math.pi * flux


def discrete_residual(field, include_boundary=False):
    """L_inf over interior nodes of the discrete div(rho grad phi) (net outflow per volume).

    Densities are evaluated from the field's own gradients, so this is the
    residual of the nonlinear equation.  The half cells on the inner boundary
    and on the axis/wall columns are excluded unless ``include_boundary``;
    their truncation error is only O(h) even though the solution is O(h^2).
    """
    mesh = field.mesh
    rho_ref = _rho_ref(field.model, field.U, field.cfg.subsonic_margin)
    A, b = _assemble(mesh, field.rho, field.U, rho_ref, field.inflow)
    res = (A @ field.phi[1:].ravel() - b).reshape(mesh.n_r, mesh.n_theta + 1)
    res = np.abs(res / (mesh.cell_volumes[1:] / (2.0 * math.pi)))
    if not include_boundary:
        res = res[:-1, 1:-1]
    return float(np.max(res))
