import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from rieszlab.measure import GridField, GridSpec
from rieszlab.profiles import (V_eval, V_grad, decay_slope, frac_integral, frac_roundtrip, legendre, legendre_dual,
                               phi_circ, riesz_constant_A, v_eval)


@pytest.mark.parametrize("t, order, expected", [(0.5, 0, 0.25), (0.5, 1, 1.0), (0.0, 0, 0.0), (0.0, 1, 0.0),
                                                (0.7, 2, 2.0), (3.0, 2, 0.0)])
def test_v_values(t, order, expected):
    assert v_eval(t, order) == pytest.approx(expected, abs=1e-12)


def test_v_linear_beyond_two():
    assert v_eval(3.0) == pytest.approx(v_eval(2.0) + v_eval(2.0, 1), rel=1e-12)
    assert 3.0 <= v_eval(3.0) <= 9.0


def test_v_second_derivative_non_increasing():
    t = np.linspace(0, 3, 3001)
    assert np.all(np.diff(v_eval(t, 2)) <= 1e-9)


@pytest.mark.parametrize("x, expected", [((0.0, 0.0), 0.0), ((0.6, 0.8), 1.0)])
def test_V_values(x, expected):
    assert V_eval(np.array(x)) == pytest.approx(expected, abs=1e-12)


def test_V_gradient_bound():
    pts = np.random.default_rng(0).normal(scale=3, size=(10 ** 4, 2))
    g = V_grad(pts)
    assert np.all(np.hypot(g[:, 0], g[:, 1]) <= 4)
    assert np.all(V_grad(np.zeros(2)) == 0)


@pytest.mark.parametrize("tau, expected", [(0.0, 0.0), (1.0, 0.25), (2.0, 1.0)])
def test_legendre_values(tau, expected):
    assert legendre(tau) == pytest.approx(expected, abs=1e-12)


def test_legendre_rejects_outside_slope_range():
    with pytest.raises(ValueError):
        legendre(10.0)


@given(st.floats(0.0, 2.0))
@settings(max_examples=25, deadline=None)
def test_legendre_involution(t):
    assert legendre_dual(t) == pytest.approx(v_eval(t), abs=1e-6)


@given(st.floats(0.0, 20.0), st.floats(1.0, 10.0))
@settings(max_examples=200, deadline=None)
def test_profile_inequalities(t, a):
    v, dv = v_eval(t), v_eval(t, 1)
    eps = 1e-12 * (1 + a * a * v)
    assert min(t, t * t) <= v + eps and v <= t * t + eps
    assert dv <= 4 and t * dv <= 2 * v + eps and dv * dv <= 4 * v + eps
    assert v_eval(a * t) <= a * a * v + eps


@pytest.mark.parametrize("alpha, expected", [
    (1.0, 1.0),
    (1.5, math.sqrt(math.pi) * gamma(0.25) / gamma(0.75)),
    (0.5, gamma(0.75) / gamma(0.25) / math.sqrt(math.pi)),
])
def test_riesz_constant(alpha, expected, derived):
    assert riesz_constant_A(2, alpha) == pytest.approx(expected, rel=1e-12)
    if alpha != 1.0:
        assert riesz_constant_A(2, alpha) == pytest.approx(
            derived[("riesz_constant_A", f'{{"alpha": {alpha}, "d": 2}}')]["value"], rel=1e-9)


def test_riesz_constant_pole():
    with pytest.raises(ValueError):
        riesz_constant_A(2, 4.0)


def test_frac_integral_zero_and_symmetry():
    spec = GridSpec(6.0, 128)
    assert np.all(frac_integral(GridField(spec, np.zeros((128, 128))), 0.7).data == 0)
    X, Y = spec.mesh()
    out = frac_integral(GridField(spec, np.exp(-(X ** 2 + Y ** 2))), 0.7).data
    ring = np.isclose(np.hypot(X, Y), np.hypot(X, Y)[64, 70])
    assert np.var(out[ring]) <= 1e-8 * np.abs(out).max()


def test_frac_semigroup():
    # a zero-mass density keeps K_alpha phi decaying fast enough for a finite window
    spec = GridSpec(12.0, 256)
    X, Y = spec.mesh()
    r2 = X ** 2 + Y ** 2
    phi = GridField(spec, np.exp(-r2) - 0.25 * np.exp(-r2 / 4))
    two = frac_integral(frac_integral(phi, 0.5), 0.7).data
    one = frac_integral(phi, 1.2).data
    inner = np.s_[96:160, 96:160]
    assert np.linalg.norm(two[inner] - one[inner]) / np.linalg.norm(one[inner]) <= 0.02


def test_roundtrip_identity():
    spec = GridSpec(6.0, 128)
    X, Y = spec.mesh()
    phi = GridField(spec, np.exp(-(X ** 2 + Y ** 2)))
    back = frac_roundtrip(phi, 1.5)
    assert np.linalg.norm(back.data - phi.data) / np.linalg.norm(phi.data) <= 0.02


def test_phi_circ():
    assert phi_circ(np.zeros(2)) == pytest.approx(math.e)
    assert phi_circ(np.array([0.6, 0.8])) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("s", [1.25, 1.5, 1.75])
def test_psi_decay_slope(s):
    assert abs(decay_slope(s) + (4 - s)) <= 0.3
