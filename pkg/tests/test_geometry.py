import math

import numpy as np
import pytest

from potflow import geometry
from potflow.errors import ConfigurationError


def test_exterior_mesh_layout():
    mesh = geometry.build_exterior_mesh(geometry.ExteriorDomain(2.0), 16, 8)
    assert mesh.sigma_max == 0.5
    assert mesh.sigma[0] == 0.0 and math.isinf(mesh.r[0])
    assert mesh.theta_max == pytest.approx(math.pi, rel=1e-15)
    assert mesh.inner_boundary == "slip" and mesh.outer_theta_boundary == "axis"


def test_cone_mesh_layout():
    cone = geometry.ConeDomain(half_angle=math.pi / 6, inner_radius=4.0)
    mesh = geometry.build_cone_mesh(cone, 16, 8)
    assert mesh.sigma_max == 0.25
    assert mesh.theta_max == pytest.approx(math.pi / 6, rel=1e-15)
    assert mesh.outer_theta_boundary == "slip"


def test_invalid_domains_and_sizes():
    with pytest.raises(ConfigurationError):
        geometry.ConeDomain(half_angle=0.6 * math.pi)
    with pytest.raises(ConfigurationError):
        geometry.ExteriorDomain(0.0)
    with pytest.raises(ConfigurationError):
        geometry.ExteriorDomain(1.0, dim=4)
    with pytest.raises(ConfigurationError):
        geometry.build_exterior_mesh(geometry.ExteriorDomain(), 4, 8)


def test_solid_angles():
    assert geometry.solid_angle(geometry.ConeDomain(half_angle=math.pi / 2)) == pytest.approx(2 * math.pi, rel=1e-15)
    assert geometry.solid_angle(geometry.ConeDomain(half_angle=math.pi / 6)) == pytest.approx(
        2 * math.pi * (1 - math.sqrt(3) / 2), rel=1e-14
    )
    assert geometry.unit_sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert geometry.unit_sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-15)


def test_angular_weights_sum_to_cap_area():
    cone = geometry.ConeDomain(half_angle=0.4)
    mesh = geometry.build_cone_mesh(cone, 16, 24)
    assert 2 * math.pi * mesh.angular_weights.sum() == pytest.approx(geometry.solid_angle(cone), rel=1e-14)


def test_constant_integrates_to_shell_volume():
    mesh = geometry.build_exterior_mesh(geometry.ExteriorDomain(1.0), 32, 16)
    vol = mesh.integrate(1.0, 1.3, 7.1)
    assert vol == pytest.approx(4 * math.pi / 3 * (7.1**3 - 1.3**3), rel=1e-13)
    with pytest.raises(ConfigurationError):
        mesh.integrate(1.0, 2.0, math.inf)


@pytest.mark.parametrize("n", [64, 128, 256])
def test_shell_integration_accuracy(n):
    mesh = geometry.build_exterior_mesh(geometry.ExteriorDomain(1.0), n, n // 2)
    with np.errstate(divide="ignore"):
        vals = np.broadcast_to(mesh.sigma[:, None] ** 4, (n + 1, n // 2 + 1))
    exact = 4 * math.pi * (0.5 - 0.125)
    assert mesh.integrate(vals, 2.0, 8.0) == pytest.approx(exact, rel=5e-3)


def test_node_coordinates_roundtrip():
    from potflow.fields import to_spherical

    mesh = geometry.build_exterior_mesh(geometry.ExteriorDomain(1.0), 16, 8)
    pts = mesh.nodes_xyz()[1:]
    r, theta, _ = to_spherical(pts)
    assert np.allclose(r, np.broadcast_to(mesh.r[1:, None], r.shape), rtol=1e-14)
    assert np.allclose(theta, np.broadcast_to(mesh.theta[None, :], theta.shape), atol=1e-14)


def test_mesh_csv(tmp_path):
    mesh = geometry.build_exterior_mesh(geometry.ExteriorDomain(1.0), 8, 8)
    mesh.to_csv(tmp_path / "mesh.csv")
    head = (tmp_path / "mesh.csv").read_text().splitlines()
    assert head[0] == "sigma,theta,r,x1,x2"
    assert len(head) == 1 + 9 * 9
