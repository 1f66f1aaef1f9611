"""
Config-driven experiments: solve, run the requested checks, write reports.

A config is a TOML file::

    name = "airfoil_incompressible_sphere"
    scenario = "airfoil"              # airfoil | nozzle | oracle-only

    [gas]                             # GasModel.from_dict keys
    mode = "incompressible"
    rho_bar = 1.0

    [domain]                          # obstacle_radius | half_angle(_deg), inner_radius
    obstacle_radius = 1.0

    [flow]                            # u_infinity or mach; mass_flux or flux_density
    u_infinity = 1.0

    [mesh]
    n_r = 256
    n_theta = 128

    [solver]                          # SolverConfig keys
    linear_solver = "cg"

    [checks.oracle_error]
    tolerance = 1e-4

    [[checks.decay]]
    quantity = "speed_error"
    target = 3.0
    tol = 0.1

The full list of keys is in README.md.  Every check writes a record with its
name, measured value(s), tolerance and a pass flag.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import farfield, gas, oracles, postproc, solver
from .errors import (
    ConfigurationError,
    InsufficientDataError,
    LinearSolveError,
    NonConvergenceError,
    NotSubsonicError,
    PotflowError,
)
from .geometry import ConeDomain, ExteriorDomain, solid_angle

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "load_config",
    "bundled_configs",
    "run_experiment",
    "run_config",
    "sweep",
    "EXIT_OK",
    "EXIT_CHECK_FAILED",
    "EXIT_CONFIG",
    "EXIT_NONCONVERGENCE",
]

log = logging.getLogger("potflow")

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 1, 2, 3
SCENARIOS = ("airfoil", "nozzle", "oracle-only")
CHECKS = ("oracle_error", "convergence", "decay", "multipole", "barrier", "optimality",
          "lemma21", "cone_orthogonality", "kelvin")
CONFIG_DIR = Path(__file__).with_name("configs")

_TOP_KEYS = {"name", "scenario", "gas", "domain", "flow", "mesh", "solver", "checks", "oracle"}


def _require_table(data, key):
    val = data.get(key, {})
    if not isinstance(val, dict):
        raise ConfigurationError(f"[{key}] must be a table")
    return dict(val)


@dataclass
class ExperimentConfig:
    name: str
    scenario: str
    model: gas.GasModel
    domain: object
    flow: dict
    n_r: int
    n_theta: int
    solver: solver.SolverConfig
    checks: dict
    oracle: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data):
        data = copy.deepcopy(dict(data))
        extra = set(data) - _TOP_KEYS
        if extra:
            raise ConfigurationError(f"unknown top-level keys {sorted(extra)}")
        scenario = data.get("scenario")
        if scenario not in SCENARIOS:
            raise ConfigurationError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
        model = gas.GasModel.from_dict(_require_table(data, "gas") or {"mode": "incompressible"})
        dom = _require_table(data, "domain")
        oracle = _require_table(data, "oracle")
        kind = oracle.get("kind")
        if scenario == "oracle-only":
            if kind not in ("sphere_dipole", "radial_cone", "point_source"):
                raise ConfigurationError("oracle-only needs [oracle] kind = sphere_dipole | radial_cone | point_source")
        nozzle_like = scenario == "nozzle" or kind == "radial_cone"
        if nozzle_like:
            if "half_angle_deg" in dom:
                dom["half_angle"] = math.radians(dom.pop("half_angle_deg"))
            unknown = set(dom) - {"half_angle", "inner_radius", "vertex"}
            if unknown:
                raise ConfigurationError(f"unexpected cone keys {sorted(unknown)}")
            if "vertex" in dom:
                dom["vertex"] = tuple(float(v) for v in dom["vertex"])
            domain = ConeDomain(**dom)
        else:
            unknown = set(dom) - {"obstacle_radius"}
            if unknown:
                raise ConfigurationError(f"unexpected exterior-domain keys {sorted(unknown)}")
            domain = ExteriorDomain(**dom)
        flow = _require_table(data, "flow")
        unknown = set(flow) - {"u_infinity", "mach", "mass_flux", "flux_density", "inflow", "amplitude"}
        if unknown:
            raise ConfigurationError(f"unexpected flow keys {sorted(unknown)}")
        mesh = _require_table(data, "mesh")
        unknown = set(mesh) - {"n_r", "n_theta"}
        if unknown:
            raise ConfigurationError(f"unexpected mesh keys {sorted(unknown)}")
        n_r = int(mesh.get("n_r", 128))
        n_theta = int(mesh.get("n_theta", n_r // 2))
        try:
            scfg = solver.SolverConfig(**_require_table(data, "solver"))
        except TypeError as exc:
            raise ConfigurationError(f"bad [solver] table: {exc}") from None
        checks = _require_table(data, "checks")
        unknown = set(checks) - set(CHECKS)
        if unknown:
            raise ConfigurationError(f"unknown checks {sorted(unknown)}")
        cfg = cls(
            name=str(data.get("name", "experiment")),
            scenario=scenario,
            model=model,
            domain=domain,
            flow=flow,
            n_r=n_r,
            n_theta=n_theta,
            solver=scfg,
            checks=checks,
            oracle=oracle,
            raw=data,
        )
        cfg._validate()
        return cfg

    def _validate(self):
        if self.n_r < 8 or self.n_theta < 8:
            raise ConfigurationError("mesh sizes must be at least 8")
        if self.scenario == "airfoil" and "u_infinity" not in self.flow and "mach" not in self.flow:
            raise ConfigurationError("airfoil flow needs u_infinity or mach")
        if "mach" in self.flow and self.model.is_incompressible:
            raise ConfigurationError("mach is only meaningful for a compressible gas")
        if self.scenario == "nozzle" and "mass_flux" not in self.flow and "flux_density" not in self.flow:
            raise ConfigurationError("nozzle flow needs mass_flux or flux_density")
        if self.flow.get("inflow", "uniform") not in ("uniform", "perturbed"):
            raise ConfigurationError("inflow must be 'uniform' or 'perturbed'")
        incompressible_airfoil = (self.scenario == "airfoil" and self.model.is_incompressible) or (
            self.scenario == "oracle-only" and self.oracle.get("kind") in ("sphere_dipole", "point_source")
        )
        if "multipole" in self.checks and not incompressible_airfoil:
            raise ConfigurationError("multipole checks need an incompressible airfoil field")
        cone = isinstance(self.domain, ConeDomain)
        for key in ("optimality", "cone_orthogonality"):
            if key in self.checks and not cone:
                raise ConfigurationError(f"{key} checks need a cone domain")
        if "convergence" in self.checks and self.scenario == "oracle-only":
            raise ConfigurationError("convergence studies need a solver scenario")
        decay = self.checks.get("decay", [])
        if not isinstance(decay, list):
            raise ConfigurationError("checks.decay must be an array of tables")
        for d in decay:
            if "quantity" not in d or ("target" not in d and "min" not in d):
                raise ConfigurationError("each decay check needs quantity and target/tol or min")

    # -- derived quantities ------------------------------------------------
    def u_infinity(self):
        if "mach" in self.flow:
            return gas.speed_for_mach(float(self.flow["mach"]), self.model)
        return float(self.flow.get("u_infinity", 0.0))

    def mass_flux(self):
        if "mass_flux" in self.flow:
            return float(self.flow["mass_flux"])
        g = float(self.flow.get("flux_density", 0.0))
        return g * solid_angle(self.domain) * self.domain.inner_radius**2


def load_config(path):
    path = Path(path)
    if not path.exists():
        candidate = CONFIG_DIR / (path.name if path.suffix else path.name + ".toml")
        if candidate.exists():
            path = candidate
        else:
            raise ConfigurationError(f"config file {path} not found")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(data)


def bundled_configs():
    return sorted(CONFIG_DIR.glob("*.toml"))


# -- solving ---------------------------------------------------------------


def _solve(cfg, n_r=None, n_theta=None):
    n_r = n_r or cfg.n_r
    n_theta = n_theta or cfg.n_theta
    if cfg.scenario == "airfoil":
        return solver.solve_airfoil(cfg.domain, cfg.model, cfg.u_infinity(), n_r, n_theta, cfg.solver)
    m = cfg.mass_flux()
    inflow = None
    if cfg.flow.get("inflow", "uniform") == "perturbed":
        amp = float(cfg.flow.get("amplitude", 0.1))
        dom = cfg.domain

        def inflow(mesh):
            return solver.perturbed_inflow(dom, m, mesh, amp)

    return solver.solve_nozzle(cfg.domain, cfg.model, m, n_r, n_theta, cfg.solver, inflow=inflow)


def _oracle_field(cfg):
    kind = cfg.oracle["kind"]
    if kind == "sphere_dipole":
        rho_bar = cfg.model.rho_bar if cfg.model.is_incompressible else 1.0
        return oracles.SphereDipoleField(cfg.u_infinity() or 1.0, cfg.domain.obstacle_radius, rho_bar)
    if kind == "radial_cone":
        return oracles.RadialConeField(cfg.mass_flux(), cfg.domain, cfg.model)
    return oracles.PointSourceField(float(cfg.oracle.get("m", 1.0)),
                                    cfg.model.rho_bar if cfg.model.is_incompressible else 1.0,
                                    cfg.domain.obstacle_radius)


def oracle_error(field, cfg):
    """Nodal error of a solver field against its closed-form counterpart.

    Airfoil: L-inf |Phi_h - Phi| (incompressible only).  Nozzle with uniform
    inflow: max relative speed error against the radial oracle.
    """
    mesh = field.mesh
    if field.mode == "airfoil":
        if not cfg.model.is_incompressible:
            raise ConfigurationError("the sphere-dipole oracle is incompressible")
        exact = oracles.SphereDipoleField(field.U, 1.0 / mesh.sigma_max)
        xyz = mesh.nodes_xyz()[1:]
        err = np.abs(field.phi[1:] - exact.phi_diff(xyz))
        return float(np.max(err)), "linf_phi"
    if cfg.flow.get("inflow", "uniform") != "uniform":
        raise ConfigurationError("the radial oracle needs uniform inflow")
    q_exact = oracles.radial_cone_flow(cfg.mass_flux(), cfg.domain, cfg.model, mesh.r[1:])
    q_h = np.sqrt(field.q2[1:])
    return float(np.max(np.abs(q_h - q_exact[:, None]) / q_exact[:, None])), "rel_speed"


# -- checks ----------------------------------------------------------------


def _record(name, passed, **values):
    rec = {"check": name, "passed": bool(passed)}
    rec.update(values)
    return rec


def _shells_for(sampler, spec):
    if "shells" in spec:
        r0, r1 = spec["shells"]
        return postproc.dyadic_shells(float(r0), float(r1))
    return postproc.default_shells(sampler)


def check_oracle_error(field, cfg, spec, ctx):
    err, kind = oracle_error(field, cfg)
    tol = float(spec.get("tolerance", math.inf))
    ctx["oracle_error"] = err
    return _record("oracle_error", err <= tol, value=err, metric=kind, tolerance=tol)


def check_convergence(field, cfg, spec, ctx):
    sizes = [int(s) for s in spec.get("sizes", [64, 128, 256])]
    lo, hi = spec.get("ratio_range", [3.4, 4.6])
    errors = []
    for n in sizes:
        f = field if (n == cfg.n_r and cfg.n_theta == n // 2) else _solve(cfg, n, n // 2)
        errors.append(oracle_error(f, cfg)[0])
    ratios = [errors[k] / errors[k + 1] for k in range(len(errors) - 1)]
    ok = all(lo <= r <= hi for r in ratios)
    ctx["tables"]["convergence"] = (["n_r", "n_theta", "error"], [[n, n // 2, e] for n, e in zip(sizes, errors)])
    return _record("convergence", ok, sizes=sizes, errors=errors, ratios=ratios, tolerance=[lo, hi])


def check_decay(field, cfg, spec, ctx):
    q = spec["quantity"]
    shells = _shells_for(field, spec)
    try:
        fit = postproc.decay_fit(field, q, shells)
    except InsufficientDataError:
        if any(postproc.shell_sup(field, q, r) > 0 for r in shells):
            raise
        # an identically vanishing quantity satisfies every decay bound but realises no rate
        return _record(f"decay:{q}", "min" in spec, value=None, note="quantity vanishes on every shell",
                       minimum=spec.get("min"), target=spec.get("target"), tolerance=spec.get("tol", 0.0))
    ctx["tables"][f"decay_{q}"] = fit
    ctx.setdefault("exponents", {})[q] = fit.exponent
    if "target" in spec:
        tol = float(spec.get("tol", 0.1))
        ok = abs(fit.exponent - float(spec["target"])) <= tol
        return _record(f"decay:{q}", ok, value=fit.exponent, target=float(spec["target"]), tolerance=tol,
                       fit=fit.to_dict())
    lo = float(spec["min"])
    return _record(f"decay:{q}", fit.exponent >= lo, value=fit.exponent, minimum=lo, tolerance=0.0,
                   fit=fit.to_dict())


def check_multipole(field, cfg, spec, ctx):
    c = postproc.multipole_extract(field)
    g_tol = float(spec.get("G_tol", 1e-5))
    g1 = float(spec.get("G1_target", -0.5 * getattr(field, "U", 1.0)))
    g1_rel = float(spec.get("G1_rel_tol", 0.02))
    other = float(spec.get("other_tol", 1e-4))
    parts = {
        "G": abs(c.G) <= g_tol,
        "G1": abs(c.G_i[0] - g1) <= g1_rel * abs(g1),
        "G2_G3": max(abs(c.G_i[1]), abs(c.G_i[2])) <= other,
        "G_ij": float(np.max(np.abs(c.G_ij))) <= other,
    }
    ctx["G1"] = float(c.G_i[0])
    rec = _record("multipole", all(parts.values()), coefficients=c.to_dict(), parts=parts,
                  tolerance={"G": g_tol, "G1_rel": g1_rel, "other": other})
    min_exp = spec.get("residual_min_exponent")
    if min_exp is not None:
        fit = postproc.expansion_residual_fit(field, c, _shells_for(field, spec))
        ctx["tables"]["expansion_residual"] = fit
        ok = fit.exact or fit.noise_floor or fit.exponent >= float(min_exp)
        rec["residual"] = fit.to_dict()
        rec["residual_ok"] = bool(ok)
        rec["residual_min_exponent"] = float(min_exp)
        rec["passed"] = rec["passed"] and bool(ok)
    return rec


def check_barrier(field, cfg, spec, ctx):
    rep = farfield.field_barrier_check(
        field,
        beta=float(spec.get("beta", 0.5)),
        r_prime=float(spec.get("r_prime", 2.0)),
        tol_constant=float(spec.get("tol_constant", 1.0)),
    )
    ok = rep.passed and (rep.subsolution_ok is not False)
    details = rep.to_dict()
    details["sign_passed"] = details.pop("passed")
    return _record("barrier", ok, **details)


def check_optimality(field, cfg, spec, ctx):
    m = cfg.mass_flux()
    shells = _shells_for(field, spec)
    cert = oracles.optimality_certificate(field, cfg.domain, m, shells,
                                          tolerance=float(spec.get("tolerance", 1e-4)))
    return _record("optimality", cert.passed, vacuous=cert.vacuous, tolerance=cert.tolerance,
                   certificate=cert.to_dict())


def lemma21_suite(n_samples=1000, seed=0, dim=3, cond=10.0):
    """Max relative Lemma-type identity residual over random SPD a_inf, x and l."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        Qm, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        ev = rng.uniform(1.0, cond, size=dim)
        a = (Qm * ev) @ Qm.T
        a = 0.5 * (a + a.T)
        A = np.linalg.inv(a)
        form = farfield.QuadraticForm(0.5 * (A + A.T), center=rng.normal(size=dim))
        # exact inverse pair: rebuild a from the symmetrised A
        a = np.linalg.inv(form.A)
        x = form.center + rng.normal(size=dim) * rng.uniform(0.5, 20.0)
        l = rng.uniform(0.1, 5.0)
        res = farfield.lemma21_residual(x, l, a, form)
        worst = max(worst, abs(res) / farfield.lemma21_scale(x, l, a, form))
    return worst


def check_lemma21(field, cfg, spec, ctx):
    n = int(spec.get("samples", 1000))
    tol = float(spec.get("tolerance", 1e-10))
    worst = lemma21_suite(n, int(spec.get("seed", 0)))
    return _record("lemma21", worst <= tol, value=worst, samples=n, tolerance=tol)


def check_cone_orthogonality(field, cfg, spec, ctx):
    rho0 = float(gas.density_from_speed(0.0, cfg.model))
    form = farfield.QuadraticForm(np.eye(3) / rho0, center=cfg.domain.vertex)
    tol = float(spec.get("tolerance", 1e-12))
    val, ok = farfield.cone_orthogonality_check(cfg.domain, form, tolerance=tol)
    return _record("cone_orthogonality", ok, value=val, tolerance=tol)


def kelvin_harmonicity(sampler, y0, steps, n=3):
    """7-point Laplacian of the Kelvin transform of Phi at y0 for each step."""
    fbar = farfield.kelvin_potential(sampler.phi_diff, n)
    y0 = np.asarray(y0, dtype=float)
    out = []
    for h in steps:
        e = np.eye(3) * h
        lap = sum(fbar(y0 + e[i]) + fbar(y0 - e[i]) for i in range(3)) - 6.0 * fbar(y0)
        out.append(abs(float(lap)) / h**2)
    return np.array(out)


def check_kelvin(field, cfg, spec, ctx):
    rng = np.random.default_rng(int(spec.get("seed", 0)))
    x = rng.normal(size=(1000, 3)) * 10.0
    inv = float(np.max(np.abs(farfield.kelvin_map(farfield.kelvin_map(x)) - x) / np.linalg.norm(x, axis=1)[:, None]))
    y0 = np.asarray(spec.get("y0", [0.05, 0.02, 0.0]), dtype=float)
    steps = np.asarray(spec.get("steps", [0.008, 0.004, 0.002]), dtype=float)
    lap = kelvin_harmonicity(field, y0, steps)
    order = float(np.polyfit(np.log(steps), np.log(np.maximum(lap, 1e-300)), 1)[0])
    inv_tol = float(spec.get("involution_tol", 1e-14))
    min_order = float(spec.get("min_order", 1.8))
    ok = inv <= inv_tol and (order >= min_order or np.max(lap) < 1e-8)
    return _record("kelvin", ok, involution=inv, involution_tol=inv_tol, laplacian=lap.tolist(),
                   steps=steps.tolist(), order=order, tolerance=min_order)


_CHECK_FUNCS = {
    "oracle_error": check_oracle_error,
    "convergence": check_convergence,
    "decay": check_decay,
    "multipole": check_multipole,
    "barrier": check_barrier,
    "optimality": check_optimality,
    "lemma21": check_lemma21,
    "cone_orthogonality": check_cone_orthogonality,
    "kelvin": check_kelvin,
}


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serialisable: {type(obj)}")


def _finite(obj):
    """Replace non-finite floats so the report stays strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return str(float(obj))
    return obj


def boundary_data(cfg):
    """Plain description of the inner-boundary data used for a scenario."""
    if cfg.scenario == "airfoil":
        return {"inner": "slip on the sphere |x| = a", "neumann_phi": "-u_inf n_1", "infinity": "Phi = 0"}
    if cfg.scenario == "nozzle":
        kind = cfg.flow.get("inflow", "uniform")
        out = {"inner": "prescribed radial mass-flux density on r = R_in", "inflow": kind,
               "walls": "slip on the lateral cone", "infinity": "Phi = 0"}
        if kind == "perturbed":
            out["amplitude"] = float(cfg.flow.get("amplitude", 0.1))
            out["shape"] = "cos(pi theta / theta_0), zero-mean"
        return out
    return {"inner": "closed-form oracle"}


def run_experiment(cfg, out_dir=None):
    """Solve and check; returns (report dict, exit status).

    Solver failures propagate (NonConvergenceError etc.); check failures are
    recorded in the report.
    """
    t0 = time.perf_counter()
    ctx = {"tables": {}}
    if cfg.scenario == "oracle-only":
        fld = _oracle_field(cfg)
        field_summary = {"oracle": cfg.oracle["kind"]}
    else:
        fld = _solve(cfg)
        field_summary = fld.summary()
    t_solve = time.perf_counter() - t0
    log.info("%s: field ready in %.2fs", cfg.name, t_solve)

    results = []
    for name in CHECKS:
        if name not in cfg.checks:
            continue
        specs = cfg.checks[name] if name == "decay" else [cfg.checks[name]]
        for spec in specs:
            tc = time.perf_counter()
            try:
                rec = _CHECK_FUNCS[name](fld, cfg, dict(spec), ctx)
            except (NonConvergenceError, NotSubsonicError, LinearSolveError):
                raise
            except PotflowError as exc:
                rec = _record(name, False, error=f"{type(exc).__name__}: {exc}")
            rec["runtime_s"] = time.perf_counter() - tc
            log.info("check %-20s %s", rec["check"], "PASS" if rec["passed"] else "FAIL")
            results.append(rec)

    passed = all(r["passed"] for r in results)
    report = {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "scenario": cfg.scenario,
        "config": cfg.raw,
        "field": field_summary,
        "boundary_data": boundary_data(cfg),
        "checks": results,
        "passed": passed,
        "runtime_s": {"solve": t_solve, "total": time.perf_counter() - t0},
        "summary": {
            "oracle_error": ctx.get("oracle_error"),
            "exponents": ctx.get("exponents", {}),
            "G1": ctx.get("G1"),
            "picard_iterations": field_summary.get("picard_iterations"),
            "max_mach": field_summary.get("max_mach"),
        },
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as fh:
            json.dump(_finite(report), fh, indent=2, default=_json_default)
        if isinstance(fld, solver.FlowField):
            fld.write_csv(out / "field.csv")
        for key, tab in ctx["tables"].items():
            if isinstance(tab, postproc.RateFit):
                tab.to_csv(out / f"{key}.csv")
            else:
                header, rows = tab
                with open(out / f"{key}.csv", "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(header)
                    w.writerows(rows)
    return report, (EXIT_OK if passed else EXIT_CHECK_FAILED)


def run_config(path, out_dir=None):
    return run_experiment(load_config(path), out_dir)


# -- sweeps ----------------------------------------------------------------


def _set_param(data, parameter, value):
    if parameter == "mesh.size":
        mesh = data.setdefault("mesh", {})
        mesh["n_r"] = int(value)
        mesh["n_theta"] = int(value) // 2
        return
    keys = parameter.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"{parameter} does not name a config table entry")
    if isinstance(node.get(keys[-1]), (dict, list)):
        raise ConfigurationError(f"{parameter} is not a scalar key")
    node[keys[-1]] = value


def _sweep_one(args):
    raw, parameter, value, out_dir = args
    row = {"parameter": parameter, "value": value}
    t0 = time.perf_counter()
    try:
        data = copy.deepcopy(raw)
        _set_param(data, parameter, value)
        cfg = ExperimentConfig.from_dict(data)
        sub = None if out_dir is None else Path(out_dir) / f"{parameter.replace('.', '_')}_{value}"
        report, status = run_experiment(cfg, sub)
        s = report["summary"]
        row.update(status=status, passed=report["passed"], oracle_error=s["oracle_error"], G1=s["G1"],
                   picard_iterations=s["picard_iterations"], max_mach=s["max_mach"])
        for q, e in s["exponents"].items():
            row[f"exponent_{q}"] = e
        row["error"] = ""
    except ConfigurationError as exc:
        row.update(status=EXIT_CONFIG, passed=False, error=str(exc))
    except (NonConvergenceError, NotSubsonicError, LinearSolveError) as exc:
        row.update(status=EXIT_NONCONVERGENCE, passed=False, error=str(exc))
    except Exception as exc:  # noqa: BLE001 - a sweep records every failure and moves on
        row.update(status=EXIT_CHECK_FAILED, passed=False, error=f"{type(exc).__name__}: {exc}")
    row["runtime_s"] = time.perf_counter() - t0
    return row


def sweep(config_path, parameter, values, out_dir=None, workers=1):
    """Run one experiment per value of ``parameter``; returns the rows.

    Rows keep the order of ``values``; with an ``out_dir`` they are also
    written to sweep.csv.
    """
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    raw = load_config(config_path).raw
    jobs = [(raw, parameter, v, out_dir) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        cols = []
        for r in rows:
            cols += [k for k in r if k not in cols]
        with open(Path(out_dir) / "sweep.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            w.writerows(rows)
    return rows
