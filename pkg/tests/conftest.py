import math
import time

import numpy as np
import pytest

from potflow import gas, geometry, solver

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def sphere_fields():
    """Incompressible unit-sphere solves at 64x32, 128x64, 256x128 with their wall times."""
    out = {}
    dom = geometry.ExteriorDomain(1.0)
    model = gas.GasModel.incompressible(1.0)
    for n in (64, 128, 256):
        t0 = time.perf_counter()
        f = solver.solve_airfoil(dom, model, 1.0, n, n // 2)
        out[n] = (f, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def sphere_field(sphere_fields):
    return sphere_fields[256][0]


@pytest.fixture(scope="session")
def cone():
    return geometry.ConeDomain(half_angle=math.pi / 6, inner_radius=1.0)


@pytest.fixture(scope="session")
def air():
    return gas.GasModel.compressible(1.4, 2.5)


@pytest.fixture(scope="session")
def nozzle_mass_flux(cone):
    return 0.27 * geometry.solid_angle(cone)


@pytest.fixture(scope="session")
def nozzle_field(cone, air, nozzle_mass_flux):
    t0 = time.perf_counter()
    f = solver.solve_nozzle(cone, air, nozzle_mass_flux, 128, 64)
    return f, time.perf_counter() - t0


@pytest.fixture(scope="session")
def perturbed_nozzle_field(cone, air, nozzle_mass_flux):
    m = nozzle_mass_flux
    return solver.solve_nozzle(cone, air, m, 128, 64,
                               inflow=lambda mesh: solver.perturbed_inflow(cone, m, mesh, 0.1))


@pytest.fixture(scope="session")
def compressible_airfoil(air):
    U = gas.speed_for_mach(0.3, air)
    t0 = time.perf_counter()
    f = solver.solve_airfoil(geometry.ExteriorDomain(1.0), air, U, 256, 128)
    return f, time.perf_counter() - t0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
