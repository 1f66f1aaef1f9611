import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from potflow import oracles, postproc
from potflow.errors import InsufficientDataError, ModeError


def test_unit_ball_volume():
    assert postproc.unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    assert postproc.unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)


def test_dyadic_shells():
    r = postproc.dyadic_shells(2.0, 32.0)
    assert r[0] == 2.0 and r[-1] == pytest.approx(32.0)
    assert np.allclose(r[1:] / r[:-1], math.sqrt(2))
    with pytest.raises(InsufficientDataError):
        postproc.dyadic_shells(4.0, 2.0)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1.0, 6.0), c=st.floats(1e-3, 1e3))
def test_fit_recovers_power_law(p, c):
    r = postproc.dyadic_shells(2.0, 128.0)
    fit = postproc.fit_power_law(r, c * r**-p)
    assert fit.exponent == pytest.approx(p, abs=1e-3)


def test_fit_needs_four_shells():
    with pytest.raises(InsufficientDataError):
        postproc.fit_power_law([1.0, 2.0, 4.0], [1.0, 0.5, 0.25])
    with pytest.raises(InsufficientDataError):
        postproc.fit_power_law([1.0, 2.0, 4.0, 8.0, 16.0], [1.0, 0.0, 0.0, 0.0, 0.1])


def test_rate_fit_csv(tmp_path):
    r = postproc.dyadic_shells(2.0, 64.0)
    fit = postproc.fit_power_law(r, r**-2.0)
    fit.to_csv(tmp_path / "fit.csv")
    lines = (tmp_path / "fit.csv").read_text().splitlines()
    assert lines[0] == "r,sup_value,log_r,log_sup"
    assert len(lines) == 1 + r.size
    assert fit.to_dict()["exponent"] == pytest.approx(2.0)


def test_decay_fit_on_dipole_oracle():
    f = oracles.SphereDipoleField()
    shells = postproc.dyadic_shells(2.0, 256.0)
    assert postproc.decay_fit(f, "potential_error", shells).exponent == pytest.approx(2.0, abs=1e-6)
    assert postproc.decay_fit(f, "speed_error", shells).exponent == pytest.approx(3.0, abs=1e-6)


def test_multipole_eval_example():
    c = postproc.MultipoleCoefficients(G=0.0, G_i=np.array([-0.5, 0, 0]), G_ij=np.zeros((3, 3)))
    assert postproc.multipole_eval(c, np.array([2.0, 0, 0])) == pytest.approx(0.125, rel=1e-15)
    assert c.normalization == pytest.approx(4 * math.pi, rel=1e-15)


def test_dipole_coefficient_from_oracle():
    f = oracles.SphereDipoleField(U=1.0, a=1.0)
    c = postproc.multipole_extract(f)
    assert c.G_i[0] == pytest.approx(-0.5, abs=1e-13)
    assert abs(c.G) < 1e-14 and np.max(np.abs(c.G_ij)) < 1e-14
    assert not c.flux_nonzero


def test_opposite_phi_sign_gives_one_sixth():
    # with the Phi term taken with the other sign the dipole comes out as -U a^3 / 6
    c = postproc.multipole_extract(oracles.SphereDipoleField(), phi_sign=1.0)
    assert c.G_i[0] == pytest.approx(-1.0 / 6.0, abs=1e-13)


def test_planted_coefficients_recovered(rng):
    Gij = rng.normal(size=(3, 3))
    Gij = 0.5 * (Gij + Gij.T)
    f = oracles.PlantedMultipoleField(G=0.7, G_i=(0.2, -0.4, 0.1), G_ij=Gij, U=0.0, obstacle_radius=1.0)
    c = postproc.multipole_extract(f, radius=2.0)
    assert c.G == pytest.approx(0.7, abs=1e-13)
    assert np.allclose(c.G_i, [0.2, -0.4, 0.1], atol=1e-13)
    # G_ij only matters modulo the identity: compare trace-free parts
    tf = lambda m: m - np.trace(m) / 3 * np.eye(3)  # noqa: E731
    assert np.allclose(tf(c.G_ij), tf(Gij), atol=1e-13)
    assert c.flux_nonzero


def test_planted_octupole_residual_rate(rng):
    T = rng.normal(size=(3, 3, 3))
    f = oracles.PlantedMultipoleField(G_i=(-0.5, 0, 0), T_ijk=T)
    c = postproc.multipole_extract(f)
    fit = postproc.expansion_residual_fit(f, c, postproc.dyadic_shells(2.0, 256.0))
    assert fit.exponent == pytest.approx(4.0, abs=0.05)


def test_exact_dipole_residual_reported_exact():
    f = oracles.SphereDipoleField()
    fit = postproc.expansion_residual_fit(f, postproc.multipole_extract(f), postproc.dyadic_shells(2.0, 64.0))
    assert fit.exact and math.isinf(fit.exponent)


def test_coarse_rule_warns(rng):
    f = oracles.PlantedMultipoleField(G_i=(-0.5, 0, 0), T_ijk=rng.normal(size=(3, 3, 3)))
    with pytest.warns(postproc.QuadratureWarning):
        c = postproc.multipole_extract(f, radius=1.0, n_theta=2, n_azimuth=4)
    assert c.under_resolved


def test_rejects_compressible(compressible_airfoil):
    with pytest.raises(ModeError):
        postproc.multipole_extract(compressible_airfoil[0])


def test_solver_reconstruction(sphere_field):
    with warnings.catch_warnings():
        warnings.simplefilter("error", postproc.QuadratureWarning)
        c = postproc.multipole_extract(sphere_field)
    assert c.G_i[0] == pytest.approx(-0.5, rel=1e-4)
    for r in (4.0, 8.0, 16.0):
        pts = sphere_field.shell(r, 91)
        phi = sphere_field.phi_diff(pts)
        err = np.max(np.abs(phi - postproc.multipole_eval(c, pts)))
        assert err <= 0.01 * np.max(np.abs(phi))


def test_solver_residual_hits_noise_floor(sphere_field):
    c = postproc.multipole_extract(sphere_field)
    fit = postproc.expansion_residual_fit(sphere_field, c)
    assert fit.noise_floor and fit.floor > 0
    assert np.all(fit.sups <= 10 * fit.floor)


def test_exponent_ordering(sphere_field):
    phi = postproc.decay_fit(sphere_field, "potential_error").exponent
    grad = postproc.decay_fit(sphere_field, "speed_error").exponent
    assert grad - phi == pytest.approx(1.0, abs=0.15)


def test_shell_scaling_constants_bounded():
    f = oracles.SphereDipoleField()
    k = postproc.shell_scaling_constants(f, [2.0, 8.0, 32.0, 128.0])
    assert np.all(np.isfinite(k)) and k.max() / k.min() < 1.5


def test_shell_scaling_constants_on_solver(sphere_field):
    k = postproc.shell_scaling_constants(sphere_field, [2.0, 4.0, 8.0, 16.0])
    assert k.max() / k.min() < 1.5
