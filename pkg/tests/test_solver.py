import json
import math

import numpy as np
import pytest

from potflow import gas, geometry, oracles, solver
from potflow.errors import ConfigurationError, InfeasibleFluxError, NotSubsonicError

SPHERE = geometry.ExteriorDomain(1.0)
INC = gas.GasModel.incompressible()


def test_zero_free_stream_gives_zero_field():
    f = solver.solve_airfoil(SPHERE, INC, 0.0, 16, 8)
    assert f.converged and not np.any(f.phi)


def test_zero_flux_nozzle_gives_zero_field(cone, air):
    f = solver.solve_nozzle(cone, air, 0.0, 16, 8)
    assert f.converged and not np.any(f.phi)


def test_gauge_at_infinity(sphere_field):
    assert np.all(sphere_field.phi[0] == 0.0)
    assert abs(sphere_field.phi_diff(np.array([[1e9, 0.0, 0.0]]))[0]) < 1e-8


def test_incompressible_needs_one_linear_solve(sphere_fields):
    f = sphere_fields[64][0]
    assert len(f.history) == 2
    assert f.history[1] < f.cfg.picard_tolerance


def test_compressible_history_is_monotone(compressible_airfoil):
    f, _ = compressible_airfoil
    h = np.array(f.history)
    assert f.converged
    assert np.all(np.diff(h[2:]) < 0)


def test_compressible_stays_subsonic(compressible_airfoil):
    f, _ = compressible_airfoil
    assert f.max_speed < gas.critical_speed(f.model)
    assert 0.3 < float(np.max(f.mach)) < 1.0


def test_rejects_supersonic_free_stream(air):
    with pytest.raises(NotSubsonicError):
        solver.solve_airfoil(SPHERE, air, gas.critical_speed(air), 16, 8)


def test_rejects_infeasible_flux(cone, air):
    m = 1.01 * gas.max_mass_flux_density(air) * geometry.solid_angle(cone)
    with pytest.raises(InfeasibleFluxError):
        solver.solve_nozzle(cone, air, m, 16, 8)


def test_inflow_flux_mismatch(cone, air):
    with pytest.raises(ConfigurationError):
        solver.solve_nozzle(cone, air, 0.1, 16, 8, inflow=np.full(9, 1.0))


def test_misaligned_free_stream():
    with pytest.raises(ConfigurationError):
        solver.solve_airfoil(SPHERE, INC, [1.0, 0.5, 0.0], 16, 8)


def test_solver_config_validation():
    with pytest.raises(ConfigurationError):
        solver.SolverConfig(relaxation=0.0)
    with pytest.raises(ConfigurationError):
        solver.SolverConfig(linear_solver="gmres")


def test_direct_and_cg_agree():
    a = solver.solve_airfoil(SPHERE, INC, 1.0, 32, 16)
    b = solver.solve_airfoil(SPHERE, INC, 1.0, 32, 16, solver.SolverConfig(linear_solver="direct"))
    assert np.max(np.abs(a.phi - b.phi)) < 1e-8


def _injected_dipole(n):
    mesh = geometry.build_exterior_mesh(SPHERE, n, n // 2)
    phi = np.zeros((n + 1, n // 2 + 1))
    phi[1:] = oracles.SphereDipoleField().phi_diff(mesh.nodes_xyz()[1:])
    return solver.FlowField(mesh, phi, INC, 1.0, "airfoil", solver.SolverConfig())


def test_discrete_residual_of_exact_dipole_is_second_order():
    res = [solver.discrete_residual(_injected_dipole(n)) for n in (32, 64, 128)]
    ratios = np.array(res[:-1]) / np.array(res[1:])
    assert np.all(ratios > 3.5)
    assert solver.discrete_residual(_injected_dipole(64), include_boundary=True) > res[1]


def test_solved_field_has_small_residual(sphere_fields):
    assert solver.discrete_residual(sphere_fields[64][0]) < 1e-7


def test_nozzle_flux_conservation(nozzle_field, nozzle_mass_flux):
    f, _ = nozzle_field
    flux = solver.face_fluxes(f)
    assert np.max(np.abs(flux - nozzle_mass_flux)) < 1e-6 * nozzle_mass_flux
    assert f.summary()["mass_flux"] == pytest.approx(nozzle_mass_flux, rel=1e-12)


def test_perturbed_nozzle_flux_conservation(perturbed_nozzle_field, nozzle_mass_flux):
    flux = solver.face_fluxes(perturbed_nozzle_field)
    assert np.max(np.abs(flux - nozzle_mass_flux)) < 1e-6 * nozzle_mass_flux


def test_perturbed_inflow_carries_the_flux(cone, nozzle_mass_flux):
    mesh = geometry.build_cone_mesh(cone, 16, 16)
    g = solver.perturbed_inflow(cone, nozzle_mass_flux, mesh, 0.2)
    total = 2 * math.pi * np.sum(g * mesh.angular_weights) * cone.inner_radius**2
    assert total == pytest.approx(nozzle_mass_flux, rel=1e-13)
    assert np.ptp(g) > 0


def test_airfoil_face_flux_vanishes(sphere_fields):
    f = sphere_fields[64][0]
    assert np.max(np.abs(solver.face_fluxes(f)[1:])) < 1e-8


def test_picard_step_on_converged_field(sphere_fields):
    f = sphere_fields[64][0]
    _, update = solver.picard_step(f)
    assert update < 1e-9


def test_summary_and_csv(tmp_path, sphere_fields):
    f = sphere_fields[64][0]
    f.write_summary(tmp_path / "s.json")
    f.write_csv(tmp_path / "f.csv")
    s = json.loads((tmp_path / "s.json").read_text())
    assert s["mode"] == "airfoil" and s["converged"]
    assert s["mesh"]["n_r"] == 64
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "r,theta,phi_diff,speed_error,rho,mach"
    assert len(lines) == 1 + 65 * 33


def test_sampler_rejects_points_outside(sphere_field, nozzle_field):
    with pytest.raises(ValueError):
        sphere_field.phi_diff(np.array([[0.5, 0.0, 0.0]]))
    with pytest.raises(ValueError):
        nozzle_field[0].phi_diff(np.array([[0.0, 5.0, 0.0]]))


def test_slip_data_on_obstacle(sphere_field):
    pts = np.array([[0.6, 0.8, 0.0], [1.0, 0.0, 0.0]])
    assert np.allclose(sphere_field.boundary_normal_derivative(pts), [-0.6, -1.0])
