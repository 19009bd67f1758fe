import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszlab.measure import Atomic, Disk, GridField, GridSpec, Gridded
from rieszlab.oracle import refine_check
from rieszlab.profiles import riesz_constant_A
from rieszlab.riesz import (adjoint_fft, adjoint_transform, kernel, maximal_transform, newton_potential,
                            newton_potential_grid, riesz_sigma, transform_direct, transform_fft)

ORIGIN = Atomic(np.zeros((1, 2)), np.ones(1))


def gaussian(spec, sig=0.5):
    return GridField.from_function(spec, lambda X, Y: np.exp(-(X ** 2 + Y ** 2) / (2 * sig * sig)))


@pytest.mark.parametrize("x, expected", [((1, 0), (1, 0)), ((2, 0), (2 ** -1.5, 0)), ((0, -1), (0, -1))])
def test_kernel_values(x, expected):
    assert np.allclose(kernel(1.5, np.array(x, float)), expected, atol=1e-15)


def test_direct_trivial():
    sym = Atomic(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.ones(2))
    assert np.allclose(transform_direct(sym, 1.5, [[0.0, 0.0]]), 0.0, atol=1e-15)
    assert transform_direct(ORIGIN, 1.5, [[2.0, 0.0]])[0] == pytest.approx([2 ** -1.5, 0.0])


def test_adjoint_and_potential_trivial():
    eta = Atomic(np.zeros((1, 2)), np.array([[1.0, 0.0]]))
    assert adjoint_transform(eta, 1.5, [[1.0, 0.0]])[0] == pytest.approx(-1.0)
    assert newton_potential(ORIGIN, 1.5, [[1.0, 0.0], [4.0, 0.0]]) == pytest.approx([-2.0, -1.0])


@pytest.mark.parametrize("s, n, tol", [(1.2, 256, 0.01), (1.5, 256, 0.01), (1.8, 512, 0.02)])
def test_direct_matches_frozen_quadrature(s, n, tol, derived):
    ref = derived[("quad_transform", f'{{"density": "gaussian", "point": [1.0, 0.0], "s": {s}, "sigma": 0.5}}')]
    mu = Gridded(gaussian(GridSpec(4.0, n)))
    val = transform_direct(mu, s, [[1.0, 0.0]])[0]
    assert refine_check(val[0], ref["value"][0], tol)[0]


def test_fft_zero_and_symmetry():
    spec = GridSpec(4.0, 64)
    assert np.all(transform_fft(GridField(spec, np.zeros((64, 64))), 1.5).data == 0)
    F = transform_fft(gaussian(spec), 1.5)
    centre = F.sample([[0.0, 0.0]], order=3)
    assert np.abs(centre).max() <= 1e-8 * np.abs(F.data).max()


def test_newton_gradient_is_transform():
    spec = GridSpec(4.0, 256)
    f = gaussian(spec)
    u = newton_potential_grid(f, 1.5)
    F = transform_fft(f, 1.5).data
    du = (u[2:, :] - u[:-2, :]) / (2 * spec.h)
    inner = np.s_[60:190, 60:190]
    err = np.linalg.norm(du[inner] - F[0][1:-1][inner]) / np.linalg.norm(F[0][1:-1][inner])
    assert err <= 1e-3


def test_sigma_matches_fractional_constant():
    s = 1.5
    assert riesz_sigma(s) == pytest.approx(-2 * np.pi / ((s - 1) * riesz_constant_A(2, 3 - s)))


@given(st.integers(0, 2 ** 16))
@settings(max_examples=5, deadline=None)
def test_duality(seed):
    rng = np.random.default_rng(seed)
    spec = GridSpec(3.0, 32)
    X, Y = spec.mesh()
    c = rng.uniform(-0.5, 0.5, (3, 2))
    eta = np.stack([np.exp(-4 * ((X - a) ** 2 + (Y - b) ** 2)) for a, b in c[:2]])
    nu = np.exp(-4 * ((X - c[2, 0]) ** 2 + (Y - c[2, 1]) ** 2))
    pts = spec.points()
    F = transform_direct(Gridded(GridField(spec, nu)), 1.5, pts)
    lhs = float(np.sum(F[:, 0] * eta[0].ravel() + F[:, 1] * eta[1].ravel()))
    rhs = float(np.sum(adjoint_transform(Gridded(GridField(spec, eta)), 1.5, pts) * nu.ravel()))
    assert abs(lhs - rhs) <= 1e-6 * (abs(lhs) + abs(rhs))


def test_adjoint_fft_matches_direct():
    spec = GridSpec(4.0, 128)
    X, Y = spec.mesh()
    data = np.stack([np.exp(-(X ** 2 + Y ** 2) * 4), np.zeros_like(X)])
    u = adjoint_fft(GridField(spec, data), 1.5)
    pts = np.array([[spec.axis[40], spec.axis[70]], [spec.axis[64], spec.axis[64]]])
    direct = adjoint_transform(Gridded(GridField(spec, data)), 1.5, pts)
    assert np.allclose(u[[40, 64], [70, 64]], direct, rtol=0.02, atol=1e-3 * np.abs(direct).max())


def test_maximal_transform_families():
    far = Atomic(np.array([[10.0, 0.0]]), np.ones(1))
    x = np.zeros(2)
    small = [Disk((0, 0), r) for r in (0.5, 1.0, 4.0)]
    assert maximal_transform(far, 1.5, x, small) == pytest.approx(10.0 ** -1.5)
    assert maximal_transform(far, 1.5, x, [Disk((0, 0), 100.0)]) == 0.0
    with pytest.raises(ValueError):
        maximal_transform(far, 1.5, x, [Disk((5, 5), 1.0)])
