import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from potflow import farfield as ff
from potflow import oracles, postproc
from potflow.errors import ConfigurationError, DomainError, SingularPointError
from potflow.geometry import ConeDomain

I3 = ff.QuadraticForm(np.eye(3))


def random_spd(rng, n, cond=10.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    a = (q * rng.uniform(1.0, cond, size=n)) @ q.T
    return 0.5 * (a + a.T)


def pair(a):
    A = np.linalg.inv(a)
    form = ff.QuadraticForm(0.5 * (A + A.T))
    return np.linalg.inv(form.A), form


def test_q_value_examples():
    assert ff.q_value(np.array([0.0, 2.0, 0.0]), I3) == 2.0
    assert ff.q_value(np.array([1.0, 0, 0]), ff.QuadraticForm(np.diag([4.0, 1, 1]))) == 2.0
    form = ff.QuadraticForm.from_coeffs(2.0 * np.eye(3))
    assert ff.q_value(np.array([1.0, 0, 0]), form) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    with pytest.raises(SingularPointError):
        ff.q_value(np.zeros(3), I3)


def test_form_validation():
    with pytest.raises(ConfigurationError):
        ff.QuadraticForm(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ConfigurationError):
        ff.QuadraticForm(np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ConfigurationError):
        ff.ComparisonFunction(I3, beta=1.0)
    with pytest.raises(ConfigurationError):
        ff.BarrierCheckConfig(c1=-1.0)


def test_q_power_derivatives_of_inverse_distance():
    g, h = ff.q_power_derivatives(np.array([1.0, 0, 0]), 1.0, I3)
    assert np.allclose(g, [-1, 0, 0], atol=1e-15)
    assert np.allclose(h, np.diag([2.0, -1.0, -1.0]), atol=1e-15)
    with pytest.raises(DomainError):
        ff.q_power_derivatives(np.array([1.0, 0, 0]), 0.0, I3)


def test_gradient_parallel_to_A_offset(rng):
    for _ in range(20):
        form = ff.QuadraticForm(np.linalg.inv(random_spd(rng, 3)), center=rng.normal(size=3))
        x = form.center + rng.normal(size=3) * 3
        g, _ = ff.q_power_derivatives(x, 1.7, form)
        v = form.A @ (x - form.center)
        assert np.linalg.norm(np.cross(g, v)) <= 1e-12 * np.linalg.norm(g) * np.linalg.norm(v)


def test_q_power_derivatives_finite_differences(rng):
    for n in (3, 4):
        for _ in range(20):
            form = ff.QuadraticForm(np.linalg.inv(random_spd(rng, n)), center=rng.normal(size=n))
            x = form.center + rng.normal(size=n) * rng.uniform(1.0, 5.0)
            l = n - 2
            g, h = ff.q_power_derivatives(x, l, form)
            eps = 1e-5
            f = lambda p: ff.q_value(p, form) ** (-l)  # noqa: E731
            fd_g = np.array([(f(x + eps * e) - f(x - eps * e)) / (2 * eps) for e in np.eye(n)])
            assert np.allclose(g, fd_g, rtol=1e-6, atol=1e-9 * np.abs(g).max())
            fd_h = np.array(
                [(ff.q_power_derivatives(x + eps * e, l, form)[0] - ff.q_power_derivatives(x - eps * e, l, form)[0])
                 / (2 * eps) for e in np.eye(n)]
            )
            assert np.allclose(h, fd_h, rtol=1e-6, atol=1e-8 * np.abs(h).max())


def test_q_power_identity_examples(rng):
    a, form = pair(np.eye(3))
    assert abs(ff.lemma21_residual(np.array([0.3, -1.2, 2.0]), 1.0, a, form)) < 1e-15
    x = np.array([0.6, 0.8, 0.0])
    _, h = ff.q_power_derivatives(x, 1.5, form)
    assert np.trace(h) == pytest.approx(0.75, rel=1e-14)
    for _ in range(20):
        a4, f4 = pair(random_spd(rng, 4))
        x = rng.normal(size=4) * 3
        res = ff.lemma21_residual(x, 2.0, a4, f4)
        assert abs(res) < 1e-10 * ff.lemma21_scale(x, 2.0, a4, f4)


def test_identity_rejects_mismatched_pair():
    with pytest.raises(ConfigurationError):
        ff.lemma21_residual(np.ones(3), 1.0, 2.0 * np.eye(3), I3)


def test_psi_examples():
    cmp = ff.ComparisonFunction(I3, 0.5)
    assert ff.psi(np.array([1.0, 0, 0]), cmp) == 0.0
    assert ff.psi(np.array([4.0, 0, 0]), cmp) == pytest.approx(0.125, rel=1e-15)
    big = np.array([1e8, 0, 0])
    assert ff.psi(big, cmp) * 1e8 == pytest.approx(1.0, rel=1e-3)


def test_lpsi_zero_at_limit_coefficients(rng):
    for _ in range(20):
        a, form = pair(random_spd(rng, 3))
        cmp = ff.ComparisonFunction(form, rng.uniform(0.05, 0.95))
        x = rng.normal(size=3) * 5
        scale = cmp.beta * (1 + cmp.beta) * ff.q_value(x, form) ** (-3 - cmp.beta)
        assert abs(ff.lpsi_residual(x, a, cmp)) <= 1e-10 * scale


def test_lpsi_small_beta_limit():
    a, form = pair(np.eye(3))
    x = np.array([2.0, 1.0, 0.5])
    vals = [abs(ff.lpsi_residual(x, a, ff.ComparisonFunction(form, b))) for b in (1e-2, 1e-4, 1e-6)]
    assert max(vals) < 1e-14


def planted_lpsi_exponent(sigma=0.5, beta=0.5):
    rng = np.random.default_rng(7)
    a_inf = random_spd(rng, 3, cond=3.0)
    a_inf, form = pair(a_inf)
    cmp = ff.ComparisonFunction(form, beta)
    E = rng.normal(size=(3, 3))
    E = 0.5 * (E + E.T)
    direction = rng.normal(size=3)
    direction /= ff.q_value(direction, form)
    Qs = np.geomspace(1e2, 1e5, 16)
    res = []
    for Q in Qs:
        x = Q * direction
        a = a_inf + Q ** (-1 - sigma) * E
        res.append(abs(ff.lpsi_residual(x, a, cmp)))
    return postproc.fit_power_law(Qs, res).exponent


def test_lpsi_planted_perturbation_rate():
    assert planted_lpsi_exponent() >= 3 + 1 + 0.5 - 0.1


def test_barrier_zero_field_passes():
    cmp = ff.ComparisonFunction(I3)
    pts = np.array([[r * math.cos(t), r * math.sin(t), 0] for r in (2, 5, 50) for t in np.linspace(0, math.pi, 7)])
    rep = ff.barrier_sign_check(lambda p: np.zeros(len(p)), None, cmp, ff.BarrierCheckConfig(c1=1.0), pts)
    assert rep.passed and rep.max_h_plus < 0 and rep.max_h_minus < 0


def test_barrier_dipole_passes_and_adversary_fails():
    cmp = ff.ComparisonFunction(I3)
    f = oracles.SphereDipoleField()
    pts = np.concatenate([f.shell(r, 31) for r in np.geomspace(2, 200, 20)])
    rep = ff.barrier_sign_check(f.phi_diff, None, cmp, ff.BarrierCheckConfig(c1=100.0), pts)
    assert rep.passed
    c1 = 3.0
    bad = ff.barrier_sign_check(lambda p: 2 * c1 * ff.psi(p, cmp), None, cmp, ff.BarrierCheckConfig(c1=c1), pts)
    assert not bad.passed and bad.max_h_plus > 0


def test_barrier_rejects_samples_inside_r_prime():
    cmp = ff.ComparisonFunction(I3)
    with pytest.raises(DomainError):
        ff.barrier_sign_check(lambda p: np.zeros(len(p)), None, cmp, ff.BarrierCheckConfig(c1=1.0, r_prime=2.0),
                              np.array([[1.5, 0, 0]]))


def test_automatic_c1_and_subsolution_on_dipole():
    rep = ff.field_barrier_check(oracles.SphereDipoleField())
    assert rep.passed and rep.subsolution_ok
    assert rep.c1 == pytest.approx(2 * 0.125 / (0.5 - 2**-1.5), rel=1e-3)


def test_kelvin_examples():
    x = np.array([0.0, 0.6, 0.8])
    assert np.linalg.norm(ff.kelvin_map(x)) == pytest.approx(1.0, rel=1e-15)
    assert np.allclose(ff.kelvin_map(np.array([2.0, 0, 0])), [0.5, 0, 0], rtol=0, atol=0)
    fbar = ff.kelvin_potential(lambda p: 1.0 / np.linalg.norm(p, axis=-1))
    ys = np.random.default_rng(1).normal(size=(50, 3))
    assert np.allclose(fbar(ys), 1.0, rtol=1e-14)
    with pytest.raises(SingularPointError):
        ff.kelvin_map(np.zeros(3))


def test_kelvin_gradient_transfer_on_dipole():
    # |grad_y Phibar| <= C |y|^(sigma - 1): here Phibar extends smoothly so the gradient stays bounded
    f = oracles.SphereDipoleField(center=(0.2, 0.1, -0.05))
    fbar = ff.kelvin_potential(f.phi_diff)
    sups = []
    for t in (1e-1, 1e-2, 1e-3):
        ys = t * np.random.default_rng(3).normal(size=(40, 3))
        ys /= np.linalg.norm(ys, axis=1)[:, None] / t
        h = 1e-3 * t
        g = np.stack([(fbar(ys + h * e) - fbar(ys - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
        sups.append(np.linalg.norm(g, axis=1).max() * t ** (1 - 0.5))
    assert sups[2] < sups[1] < sups[0]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_subnormal=False), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_kelvin_involution(v):
    x = np.array(v)
    err = np.linalg.norm(ff.kelvin_map(ff.kelvin_map(x)) - x)
    assert err <= 1e-14 * np.linalg.norm(x)


def test_cone_orthogonality():
    cone = ConeDomain(half_angle=math.pi / 6)
    val, ok = ff.cone_orthogonality_check(cone, I3)
    assert ok and val < 1e-14
    val, ok = ff.cone_orthogonality_check(cone, ff.QuadraticForm(2 * np.eye(3)))
    assert ok and val < 1e-14
    val, ok = ff.cone_orthogonality_check(cone, ff.QuadraticForm(np.eye(3), center=(0.1, 0, 0)))
    assert val > 1e-3 and not ok


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_comparability(seed):
    rng = np.random.default_rng(seed)
    form = ff.QuadraticForm(np.linalg.inv(random_spd(rng, 3, cond=50.0)), center=rng.normal(size=3))
    C = form.comparability_constant
    x = form.center + rng.normal(size=(20, 3)) * rng.uniform(0.1, 10)
    d = np.linalg.norm(x - form.center, axis=1)
    Q = ff.q_value(x, form)
    assert np.all(d / C <= Q * (1 + 1e-12)) and np.all(Q <= C * d * (1 + 1e-12))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), l=st.floats(0.1, 6.0))
def test_q_power_identity_property(seed, l):
    rng = np.random.default_rng(seed)
    a, form = pair(random_spd(rng, 3))
    x = rng.normal(size=3) * rng.uniform(0.5, 20)
    assert abs(ff.lemma21_residual(x, l, a, form)) <= 1e-10 * ff.lemma21_scale(x, l, a, form)
