"""
Homentropic gas thermodynamics for steady irrotational flow.

The pressure law is p(rho) = rho**gamma / gamma (gamma >= 1).  Bernoulli's
law 0.5*q**2 + h(rho) = B turns the density into a function of the speed
squared, which is the form every other module consumes.  An incompressible
mode with constant density rho_bar is provided alongside.

All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, ModeError, NotSubsonicError

__all__ = [
    "GasModel",
    "pressure",
    "pressure_derivatives",
    "enthalpy",
    "enthalpy_inverse",
    "density_from_speed",
    "density_by_bisection",
    "sound_speed",
    "critical_speed",
    "mach_number",
    "speed_for_mach",
    "rho_prime",
    "rho_second",
    "max_mass_flux_density",
]


@dataclass(frozen=True)
class GasModel:
    """Gas description: compressible (gamma, B) or incompressible (rho_bar).

    ``delta`` is the uniform-subsonicity margin: when positive, speeds with
    q >= (1 - delta) * q_cr are rejected by the density inversion.
    """

    mode: str = "compressible"
    gamma: float = 1.4
    bernoulli_B: float = 2.5
    rho_bar: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if self.mode not in ("compressible", "incompressible"):
            raise ConfigurationError(f"unknown gas mode {self.mode!r}")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigurationError("subsonic margin delta must lie in [0, 1)")
        if self.mode == "incompressible":
            if not self.rho_bar > 0:
                raise ConfigurationError("rho_bar must be positive")
            return
        if not self.gamma >= 1.0:
            raise ConfigurationError("gamma must be >= 1")
        if self.gamma > 1.0 and not self.bernoulli_B > 0:
            # density at rest is ((gamma-1) B)^(1/(gamma-1)), needs B > 0
            raise ConfigurationError("bernoulli_B must be positive for gamma > 1")

    @classmethod
    def compressible(cls, gamma=1.4, bernoulli_B=None, delta=0.0):
        """Compressible model; B defaults to 1/(gamma-1) (rho = 1 at rest)."""
        if bernoulli_B is None:
            bernoulli_B = 0.0 if gamma == 1.0 else 1.0 / (gamma - 1.0)
        return cls("compressible", float(gamma), float(bernoulli_B), 1.0, float(delta))

    @classmethod
    def incompressible(cls, rho_bar=1.0, delta=0.0):
        return cls("incompressible", rho_bar=float(rho_bar), delta=float(delta))

    @property
    def is_incompressible(self):
        return self.mode == "incompressible"

    def with_delta(self, delta):
        return GasModel(self.mode, self.gamma, self.bernoulli_B, self.rho_bar, float(delta))

    def to_dict(self):
        if self.is_incompressible:
            return {"mode": "incompressible", "rho_bar": self.rho_bar}
        return {"mode": "compressible", "gamma": self.gamma, "bernoulli_B": self.bernoulli_B}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        mode = data.pop("mode", None)
        if mode is None:
            mode = "incompressible" if "rho_bar" in data else "compressible"
        delta = float(data.pop("delta", 0.0))
        if mode == "incompressible":
            extra = set(data) - {"rho_bar"}
            if extra:
                raise ConfigurationError(f"unexpected gas keys {sorted(extra)}")
            return cls.incompressible(data.get("rho_bar", 1.0), delta=delta)
        if mode != "compressible":
            raise ConfigurationError(f"unknown gas mode {mode!r}")
        extra = set(data) - {"gamma", "bernoulli_B"}
        if extra:
            raise ConfigurationError(f"unexpected gas keys {sorted(extra)}")
        if "gamma" not in data:
            raise ConfigurationError("compressible gas needs 'gamma'")
        return cls.compressible(data["gamma"], data.get("bernoulli_B"), delta=delta)


def _positive(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise DomainError("density must be positive")
    return rho


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def pressure(rho, model):
    rho = _positive(rho)
    return _out(rho**model.gamma / model.gamma)


def pressure_derivatives(rho, model):
    """Return (p'(rho), p''(rho)) for the power law."""
    rho = _positive(rho)
    g = model.gamma
    return _out(rho ** (g - 1.0)), _out((g - 1.0) * rho ** (g - 2.0))


def enthalpy(rho, model):
    """Specific enthalpy with h' = p'/rho; h = log(rho) when gamma == 1."""
    if model.is_incompressible:
        raise ModeError("enthalpy is not defined for the incompressible model")
    rho = _positive(rho)
    g = model.gamma
    if g == 1.0:
        return _out(np.log(rho))
    return _out(rho ** (g - 1.0) / (g - 1.0))


def enthalpy_inverse(h, model):
    """Density with enthalpy h (requires h > 0 when gamma > 1)."""
    if model.is_incompressible:
        raise ModeError("enthalpy is not defined for the incompressible model")
    h = np.asarray(h, dtype=float)
    g = model.gamma
    if g == 1.0:
        return _out(np.exp(h))
    if np.any(~(h > 0)):
        raise DomainError("enthalpy must be positive for gamma > 1")
    return _out(((g - 1.0) * h) ** (1.0 / (g - 1.0)))


def critical_speed(model):
    """Speed at which q equals the local sound speed (inf when incompressible).

    For gamma > 1 this is sqrt(2 B (gamma-1)/(gamma+1)); with B = 1/(gamma-1)
    it reduces to sqrt(2/(gamma+1)).  For gamma == 1 the sound speed is
    identically 1, so q_cr = 1 for every B.
    """
    if model.is_incompressible:
        return math.inf
    g = model.gamma
    if g == 1.0:
        return 1.0
    return math.sqrt(2.0 * model.bernoulli_B * (g - 1.0) / (g + 1.0))


def _check_subsonic(q2, model):
    q2 = np.asarray(q2, dtype=float)
    if np.any(~(q2 >= 0)):
        raise DomainError("speed squared must be non-negative")
    if model.is_incompressible:
        return q2
    qmax = (1.0 - model.delta) * critical_speed(model)
    if np.any(q2 >= qmax * qmax):
        raise NotSubsonicError(
            f"speed^2 {float(np.max(q2)):.6g} not below (1-delta)^2 q_cr^2 = {qmax * qmax:.6g}"
        )
    return q2


def density_from_speed(q_squared, model):
    """Invert Bernoulli's law on the subsonic branch."""
    q2 = _check_subsonic(q_squared, model)
    if model.is_incompressible:
        return _out(np.full_like(q2, model.rho_bar))
    g = model.gamma
    head = model.bernoulli_B - 0.5 * q2
    if g == 1.0:
        return _out(np.exp(head))
    return _out(((g - 1.0) * head) ** (1.0 / (g - 1.0)))


def density_by_bisection(q_squared, model, tol=1e-15, max_iter=200):
    """Scalar Bernoulli inversion by bisection on h(rho) = B - q^2/2.

    Works for any pressure law with increasing enthalpy; used as an
    independent check of the closed form and as a fallback.
    """
    q2 = float(_check_subsonic(q_squared, model))
    if model.is_incompressible:
        return model.rho_bar
    target = model.bernoulli_B - 0.5 * q2

    def f(rho):
        return enthalpy(rho, model) - target

    lo, hi = 1e-300, 1.0
    while f(hi) < 0:
        hi *= 2.0
    # geometric bisection handles densities spanning many decades
    lo = hi / 2.0
    while f(lo) > 0 and lo > 1e-300:
        lo /= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi)


def sound_speed(rho, model):
    """c = sqrt(p'(rho)) = rho**((gamma-1)/2); inf when incompressible."""
    if model.is_incompressible:
        rho = _positive(rho)
        return _out(np.full_like(rho, math.inf))
    rho = _positive(rho)
    return _out(rho ** (0.5 * (model.gamma - 1.0)))


def mach_number(q_squared, model):
    q2 = np.asarray(q_squared, dtype=float)
    if model.is_incompressible:
        return _out(np.zeros_like(q2))
    rho = density_from_speed(q2, model)
    return _out(np.sqrt(q2) / sound_speed(rho, model))


def speed_for_mach(mach, model):
    """Flow speed with local Mach number ``mach`` (0 <= mach < 1).

    From c^2 = (gamma-1)(B - q^2/2): q^2 = M^2 (gamma-1) B / (1 + (gamma-1) M^2 / 2);
    for gamma == 1, c == 1 and q = M.
    """
    if model.is_incompressible:
        raise ModeError("the Mach number does not fix the speed of an incompressible flow")
    if not 0.0 <= mach < 1.0:
        raise DomainError("Mach number must lie in [0, 1)")
    g = model.gamma
    if g == 1.0:
        return float(mach)
    m2 = mach * mach
    return math.sqrt(m2 * (g - 1.0) * model.bernoulli_B / (1.0 + 0.5 * (g - 1.0) * m2))


def rho_prime(q_squared, model):
    """d rho / d(q^2) = -rho / (2 c^2), from differentiating Bernoulli's law."""
    q2 = _check_subsonic(q_squared, model)
    if model.is_incompressible:
        return _out(np.zeros_like(q2))
    rho = np.asarray(density_from_speed(q2, model))
    c2 = rho ** (model.gamma - 1.0)
    return _out(-rho / (2.0 * c2))


def rho_second(q_squared, model):
    """Second derivative d^2 rho / d(q^2)^2 for the power law."""
    q2 = _check_subsonic(q_squared, model)
    if model.is_incompressible:
        return _out(np.zeros_like(q2))
    g = model.gamma
    rho = np.asarray(density_from_speed(q2, model))
    rp = -0.5 * rho ** (2.0 - g)
    return _out(-0.5 * (2.0 - g) * rho ** (1.0 - g) * rp)


def max_mass_flux_density(model):
    """Sonic maximum of rho(q^2) * q over the subsonic branch."""
    if model.is_incompressible:
        return math.inf
    qc = critical_speed(model)
    g = model.gamma
    if g == 1.0:
        rho_c = math.exp(model.bernoulli_B - 0.5)
    else:
        rho_c = ((g - 1.0) * (model.bernoulli_B - 0.5 * qc * qc)) ** (1.0 / (g - 1.0))
    return rho_c * qc
