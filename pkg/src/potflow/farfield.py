"""
Barrier calculus for the far-field estimate of Phi.

With A = (a_inf)^{-1} and Q(x) = sqrt((x-c) . A (x-c)), powers Q^{-l} satisfy
sum_ij a_inf_ij d_ij Q^{-l} = l (l + 2 - n) Q^{-l-2}.  The comparison
function psi = Q^{2-n} - Q^{2-n-beta} is then a strict supersolution, and the
barriers h_pm = +-Phi/C_1 - psi are non-positive on the far field whenever
the maximum principle argument applies.  This module evaluates all of these
in closed form and checks them on sampled fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coeffs import coeff_matrix, coeffs_at_infinity
from .errors import ConfigurationError, DomainError, SingularPointError

__all__ = [
    "QuadraticForm",
    "ComparisonFunction",
    "BarrierCheckConfig",
    "BarrierReport",
    "q_value",
    "q_power_derivatives",
    "lemma21_residual",
    "lemma21_scale",
    "psi",
    "psi_derivatives",
    "lpsi_residual",
    "automatic_c1",
    "barrier_sign_check",
    "kelvin_map",
    "kelvin_potential",
    "cone_orthogonality_check",
    "field_barrier_check",
]


@dataclass(frozen=True)
class QuadraticForm:
    A: np.ndarray
    center: np.ndarray = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigurationError("A must be a square matrix")
        if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14 * np.max(np.abs(A))):
            raise ConfigurationError("A must be symmetric")
        if np.min(np.linalg.eigvalsh(A)) <= 0:
            raise ConfigurationError("A must be positive definite")
        c = np.zeros(A.shape[0]) if self.center is None else np.asarray(self.center, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "center", c)

    @classmethod
    def from_coeffs(cls, coeffs, center=None):
        """Form with A = inverse of the limit coefficient matrix."""
        a = coeffs.a if hasattr(coeffs, "a") else np.asarray(coeffs, dtype=float)
        A = np.linalg.inv(a)
        return cls(0.5 * (A + A.T), center)

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def comparability_constant(self):
        """C with |x-c|/C <= Q(x) <= C |x-c|, from the spectrum of A."""
        ev = np.linalg.eigvalsh(self.A)
        return max(math.sqrt(ev[-1]), 1.0 / math.sqrt(ev[0]))


@dataclass(frozen=True)
class ComparisonFunction:
    form: QuadraticForm
    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ConfigurationError("beta must lie in (0, 1)")


@dataclass(frozen=True)
class BarrierCheckConfig:
    c1: float = None
    r_prime: float = 2.0
    tolerance: float = 0.0
    subsolution_tolerance: float = 0.0
    fd_step: float = 1e-3

    def __post_init__(self):
        if self.c1 is not None and not self.c1 > 0:
            raise ConfigurationError("C_1 must be positive")
        if not self.r_prime > 0:
            raise ConfigurationError("R' must be positive")
        if self.tolerance < 0 or self.subsolution_tolerance < 0:
            raise ConfigurationError("tolerances must be non-negative")


@dataclass
class BarrierReport:
    c1: float
    beta: float
    r_prime: float
    max_h_plus: float
    max_h_minus: float
    tolerance: float
    passed: bool
    min_subsolution: float = None
    subsolution_tolerance: float = None
    subsolution_ok: bool = None
    n_samples: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {k: v for k, v in self.__dict__.items() if k != "extra"}
        out.update(self.extra)
        return out


def _offsets(x, form):
    x = np.asarray(x, dtype=float)
    d = x - form.center
    return d


def q_value(x, form):
    """Q = sqrt((x-c) . A (x-c)); accepts (n,) or (..., n)."""
    d = _offsets(x, form)
    q2 = np.einsum("...i,ij,...j->...", d, form.A, d)
    if np.any(q2 <= 0):
        raise SingularPointError("Q is singular at the form center")
    q = np.sqrt(q2)
    return float(q) if q.ndim == 0 else q


def q_power_derivatives(x, l, form):
    """Gradient and Hessian of Q^{-l}; shapes (..., n) and (..., n, n)."""
    if not l > 0:
        raise DomainError("exponent l must be positive")
    d = _offsets(x, form)
    Q = np.asarray(q_value(x, form))
    Ad = d @ form.A  # A symmetric
    grad = -l * Q[..., None] ** (-l - 2) * Ad
    hess = (
        l * (l + 2) * Q[..., None, None] ** (-l - 4) * Ad[..., :, None] * Ad[..., None, :]
        - l * form.A * Q[..., None, None] ** (-l - 2)
    )
    return grad, hess


def _check_pair(a, form):
    a = a.a if hasattr(a, "a") else np.asarray(a, dtype=float)
    n = form.dim
    if a.shape != (n, n) or not np.allclose(form.A @ a, np.eye(n), rtol=0, atol=1e-8):
        raise ConfigurationError("form.A is not the inverse of the limit coefficients")
    return a


def lemma21_residual(x, l, a_inf, form):
    """sum_ij a_inf_ij d_ij Q^{-l} - l (l + 2 - n) Q^{-l-2}  (identically zero)."""
    a = _check_pair(a_inf, form)
    _, hess = q_power_derivatives(x, l, form)
    Q = np.asarray(q_value(x, form))
    n = form.dim
    res = np.einsum("ij,...ij->...", a, hess) - l * (l + 2 - n) * Q ** (-l - 2)
    return float(res) if np.ndim(res) == 0 else res


def lemma21_scale(x, l, a_inf, form):
    """Magnitude of the terms entering ``lemma21_residual`` (for relative checks)."""
    a = _check_pair(a_inf, form)
    _, hess = q_power_derivatives(x, l, form)
    Q = np.asarray(q_value(x, form))
    n = form.dim
    s = np.einsum("ij,...ij->...", np.abs(a), np.abs(hess)) + abs(l * (l + 2 - n)) * Q ** (-l - 2)
    return float(s) if np.ndim(s) == 0 else s


def psi(x, cmp):
    """psi = Q^{2-n} - Q^{2-n-beta}; positive where Q > 1."""
    n = cmp.form.dim
    Q = np.asarray(q_value(x, cmp.form))
    out = Q ** (2 - n) - Q ** (2 - n - cmp.beta)
    return float(out) if out.ndim == 0 else out


def psi_derivatives(x, cmp):
    """Gradient and Hessian of psi."""
    n = cmp.form.dim
    g1, h1 = q_power_derivatives(x, n - 2, cmp.form)
    g2, h2 = q_power_derivatives(x, n - 2 + cmp.beta, cmp.form)
    return g1 - g2, h1 - h2


def lpsi_residual(x, a_at_x, cmp):
    """sum_ij a_ij(x) d_ij psi + beta (n - 2 + beta) Q^{-n-beta}.

    ``a_at_x`` is an EllipticCoeffs, an (n, n) matrix or an (..., n, n) array
    matching the leading shape of ``x``.  Zero when a equals a_inf.
    """
    a = a_at_x.a if hasattr(a_at_x, "a") else np.asarray(a_at_x, dtype=float)
    n = cmp.form.dim
    b = cmp.beta
    _, hess = psi_derivatives(x, cmp)
    Q = np.asarray(q_value(x, cmp.form))
    res = np.einsum("...ij,...ij->...", a, hess) + b * (n - 2 + b) * Q ** (-n - b)
    return float(res) if np.ndim(res) == 0 else res


def automatic_c1(phi_diff, cmp, shell_points, safety=2.0):
    """C_1 = safety * max over the sphere |x| = R' of |Phi| / psi."""
    vals = np.abs(np.asarray(phi_diff(shell_points)))
    ps = np.asarray(psi(shell_points, cmp))
    if np.any(ps <= 0):
        raise DomainError("psi must be positive on the R' sphere (need Q > 1 there)")
    c1 = safety * float(np.max(vals / ps))
    return c1 if c1 > 0 else 1.0


def _fd_hessian(fun, pts, step):
    """Central second differences of a vectorised scalar function."""
    n = pts.shape[-1]
    f0 = fun(pts)
    H = np.zeros(pts.shape[:-1] + (n, n))
    eye = np.eye(n) * step
    for i in range(n):
        fp = fun(pts + eye[i])
        fm = fun(pts - eye[i])
        H[..., i, i] = (fp - 2.0 * f0 + fm) / step**2
        for j in range(i + 1, n):
            fpp = fun(pts + eye[i] + eye[j])
            fpm = fun(pts + eye[i] - eye[j])
            fmp = fun(pts - eye[i] + eye[j])
            fmm = fun(pts - eye[i] - eye[j])
            H[..., i, j] = H[..., j, i] = (fpp - fpm - fmp + fmm) / (4.0 * step**2)
    return H


def barrier_sign_check(phi_diff, a_field, cmp, cfg, points, shell=None, interior=None):
    """Evaluate h_pm = +-Phi / C_1 - psi on sample points of Omega_{R'}.

    ``phi_diff`` maps points (N, n) -> Phi; ``a_field`` maps points -> (N, n, n)
    coefficient matrices (or None to skip the subsolution check).  When
    ``cfg.c1`` is None, C_1 is chosen automatically from ``shell`` (points on
    |x - c| = R').  ``interior`` selects the points used for the discrete
    subsolution check (default: all points at least 2 fd steps inside R').
    """
    pts = np.asarray(points, dtype=float)
    rad = np.linalg.norm(pts - cmp.form.center, axis=-1)
    if np.any(rad < cfg.r_prime * (1 - 1e-12)):
        raise DomainError("barrier samples must satisfy |x| >= R'")
    c1 = cfg.c1
    if c1 is None:
        if shell is None:
            raise ConfigurationError("automatic C_1 needs points on the R' sphere")
        c1 = automatic_c1(phi_diff, cmp, shell)
    phi = np.asarray(phi_diff(pts))
    ps = np.asarray(psi(pts, cmp))
    hp = phi / c1 - ps
    hm = -phi / c1 - ps
    max_p, max_m = float(np.max(hp)), float(np.max(hm))
    report = BarrierReport(
        c1=c1,
        beta=cmp.beta,
        r_prime=cfg.r_prime,
        max_h_plus=max_p,
        max_h_minus=max_m,
        tolerance=cfg.tolerance,
        passed=bool(max(max_p, max_m) <= cfg.tolerance),
        n_samples=int(pts.shape[0]),
    )
    if a_field is not None:
        step = cfg.fd_step
        if interior is None:
            interior = pts[rad >= cfg.r_prime + 2.0 * step]
        sub = np.asarray(interior, dtype=float)
        H_phi = _fd_hessian(lambda p: np.asarray(phi_diff(p)), sub, step)
        _, H_psi = psi_derivatives(sub, cmp)
        a = np.asarray(a_field(sub))
        l_phi = np.einsum("...ij,...ij->...", a, H_phi)
        l_psi = np.einsum("...ij,...ij->...", a, H_psi)
        lh = np.minimum(l_phi / c1 - l_psi, -l_phi / c1 - l_psi)
        report.min_subsolution = float(np.min(lh))
        report.subsolution_tolerance = cfg.subsolution_tolerance
        report.subsolution_ok = bool(report.min_subsolution >= -cfg.subsolution_tolerance)
    return report


def kelvin_map(x):
    """y = x / |x|^2 (an involution of R^n minus the origin)."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    if np.any(r2 == 0):
        raise SingularPointError("the Kelvin map is singular at the origin")
    return x / r2


def kelvin_potential(phi_diff, n=3):
    """Transformed sampler y -> |y|^{2-n} Phi(y / |y|^2)."""

    def transformed(y):
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1)
        return r ** (2 - n) * np.asarray(phi_diff(kelvin_map(y)))

    return transformed


def cone_orthogonality_check(cone, form, n_radii=32, n_azimuth=16, r_max=100.0, tolerance=1e-12):
    """max |grad Q . n| over samples of the lateral cone surface.

    Returns (max_value, passed).  A form whose center is off the vertex
    yields a positive maximum and a failed check.
    """
    vertex = np.asarray(cone.vertex, dtype=float)
    radii = np.geomspace(cone.inner_radius, max(r_max, 2 * cone.inner_radius), n_radii)
    az = np.linspace(0.0, 2.0 * math.pi, n_azimuth, endpoint=False)
    t = cone.half_angle
    R, P = np.meshgrid(radii, az, indexing="ij")
    pts = vertex + np.stack(
        [R * math.cos(t), R * math.sin(t) * np.cos(P), R * math.sin(t) * np.sin(P)], axis=-1
    )
    normals = cone.lateral_normal(P)
    d = pts - form.center
    Q = np.asarray(q_value(pts, form))
    grad = (d @ form.A) / Q[..., None]
    val = float(np.max(np.abs(np.sum(grad * normals, axis=-1))))
    return val, bool(val <= tolerance)


def _field_samples(sampler, r_prime, r_max, n_radii=48, n_angles=61):
    mesh = getattr(sampler, "mesh", None)
    c = np.asarray(sampler.center, dtype=float)
    if mesh is not None:
        r = mesh.r[(mesh.r >= r_prime) & (mesh.r <= r_max)]
        th = mesh.theta
    else:
        r = np.geomspace(r_prime, r_max, n_radii)
        th = np.linspace(0.0, sampler.theta_max, n_angles)
    R, T = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([R * np.cos(T), R * np.sin(T), np.zeros_like(R)], axis=-1).reshape(-1, 3)
    return c + pts


def field_barrier_check(sampler, beta=0.5, r_prime=2.0, r_max=None, tol_constant=1.0, c1=None):
    """barrier_sign_check on a sampler with the form built from its limit coefficients.

    a_inf = a(u_inf) (rho_bar I for a nozzle), Q is centred at the sampler's
    centre, C_1 is automatic unless given.  Both tolerances are
    ``tol_constant * h^2`` on solver fields (h the radial mesh spacing) and 0
    on closed-form fields.  Samples are the mesh nodes with R' <= r <= r_max.
    """
    model = sampler.model
    a_inf = coeffs_at_infinity(np.asarray(sampler.u_inf, dtype=float), model)
    form = QuadraticForm.from_coeffs(a_inf, center=sampler.center)
    cmp = ComparisonFunction(form, beta)
    mesh = getattr(sampler, "mesh", None)
    if r_max is None:
        r_max = sampler.resolved_range()[1] if hasattr(sampler, "resolved_range") else 100.0 * r_prime
    tol = tol_constant * mesh.h**2 if mesh is not None else 0.0
    cfg = BarrierCheckConfig(c1=c1, r_prime=r_prime, tolerance=tol, subsolution_tolerance=tol)
    pts = _field_samples(sampler, r_prime, r_max)
    shell = sampler.shell(r_prime, 181)

    def a_field(p):
        return coeff_matrix(sampler.velocity(p), model)

    # keep finite-difference stencils inside the domain
    d = pts - form.center
    rad = np.linalg.norm(d, axis=-1)
    theta = np.arccos(np.clip(d[:, 0] / rad, -1.0, 1.0))
    reach = 3.0 * cfg.fd_step
    inside = rad >= r_prime + reach
    if sampler.theta_max < math.pi:
        inside &= rad * np.sin(np.clip(sampler.theta_max - theta, 0.0, math.pi / 2)) >= reach
    rep = barrier_sign_check(sampler.phi_diff, a_field, cmp, cfg, pts, shell=shell, interior=pts[inside])
    rep.extra.update({"tol_constant": tol_constant, "r_max": float(r_max),
                      "form_A": form.A.tolist(), "form_center": form.center.tolist()})
    return rep
