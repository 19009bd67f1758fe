import numpy as np
import pytest
from hypothesis import given, strategies as st

from rieszlab.cantor import structure_from_cantor
from rieszlab.measure import Atomic, ConstructionParams, Disk, GridField, GridSpec, make_cantor_square
from rieszlab.verify import (SeparationError, V_gradient_bound_ok, calibrate_oscillation_constant, claim1_check,
                             gram_matrix, holder_check, max_principle_check, oscillation_bound,
                             oscillation_constant, reproduction_check, smooth_eta_corpus)


@pytest.mark.parametrize("a, b, lhs, rhs", [
    ([1, 1], [1, 1], 2.0, 2.0),
    ([1, 2], [1, 1], 33.0, 243 / 16),
    ([1, 1], [1, 2], 1.0625, 32 / 81),
])
def test_holder_examples(a, b, lhs, rhs):
    assert holder_check(a, b) == pytest.approx((lhs, rhs))


@given(st.lists(st.tuples(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3)), min_size=1, max_size=12))
def test_holder_inequality(pairs):
    a, b = zip(*pairs)
    lhs, rhs = holder_check(a, b)
    assert lhs >= rhs * (1 - 1e-12)


def test_holder_rejects_zero():
    with pytest.raises(ValueError):
        holder_check([1.0, 0.0], [1.0, 1.0])


def test_oscillation_far_atom():
    omega, B = Disk((0.0, 0.0), 0.99), Disk((0.0, 0.0), 1.0)
    rep = oscillation_bound(Atomic(np.array([[10.0, 0.0]]), np.ones(1)), omega, B, 0.01, 6.0, 1.5)
    assert rep.passed and rep.metadata["first_term"] == 0.0


def test_oscillation_zero_measure():
    rep = oscillation_bound(Atomic(np.zeros((0, 2)), np.zeros(0)), Disk((0, 0), 0.99), Disk((0, 0), 1.0), 0.01, 6.0, 1.5)
    assert rep.passed and rep.measured_lhs == 0.0


def test_oscillation_requires_separation():
    with pytest.raises(SeparationError):
        oscillation_bound(Atomic(np.array([[0.995, 0.0]]), np.ones(1)), Disk((0, 0), 0.99), Disk((0, 0), 1.0),
                          0.01, 6.0, 1.5)


def test_oscillation_dual_needs_balance():
    nu = Atomic(np.array([[5.0, 0.0]]), np.ones(1))
    eta = Atomic(np.array([[0.1, 0.0], [-0.1, 0.0]]), np.array([1.0, -1.0]))
    rep = oscillation_bound(nu, Disk((0, 0), 0.99), Disk((0, 0), 1.0), 0.01, 6.0, 1.5, eta=eta)
    assert rep.metadata["dual_pass"]
    with pytest.raises(ValueError):
        oscillation_bound(nu, Disk((0, 0), 0.99), Disk((0, 0), 1.0), 0.01, 6.0, 1.5,
                          eta=Atomic(eta.points, np.array([1.0, 0.0])))


def test_calibrated_constant_below_analytic():
    C = calibrate_oscillation_constant(1.5, count=40)
    assert 0 < C <= oscillation_constant(1.5)


@pytest.fixture(scope="module")
def cantor3():
    return structure_from_cantor(make_cantor_square(1.5, 3, 8.0), 3, s=1.5)


def test_claim1_on_cantor(cantor3):
    params = ConstructionParams(1.5, 3, 0.01, 6.0, 1.0, 0.5, 10.0, 0.3, 0.05)
    rep = claim1_check(cantor3, params=params)
    assert rep.passed
    assert rep.metadata["precondition"] == (params.inner_ratio < 1)


def test_gram_single_level():
    st1 = structure_from_cantor(make_cantor_square(1.5, 3, 8.0), 1, s=1.5)
    G, rep, res = gram_matrix(st1)
    assert G.shape == (1, 1) and G[0, 0] > 0 and rep.passed and len(res) == 0


def test_gram_residuals_vanish(cantor3):
    G, rep, res = gram_matrix(cantor3)
    assert np.allclose(G, G.T) and np.all(np.linalg.eigvalsh(G) >= -1e-12)
    assert res.max() <= 1e-12 and rep.passed


def test_max_principle_vacuous():
    spec = GridSpec(2.0, 32)
    rep = max_principle_check(GridField(spec, np.zeros((2, 32, 32))), 1.5)
    assert rep.passed and rep.metadata["vacuous"]


@pytest.mark.parametrize("s", [1.25, 1.75])
def test_max_principle_small_corpus(s):
    reps = [max_principle_check(eta, s) for eta in smooth_eta_corpus(5, 1, GridSpec(4.0, 64))]
    assert all(r.passed for r in reps)


def test_max_principle_argument_errors():
    with pytest.raises(ValueError):
        max_principle_check(None, 1.5)


def test_reproduction_zero():
    spec = GridSpec(2.0, 32)
    rep = reproduction_check(GridField(spec, np.zeros((32, 32))), 1.5)
    assert rep.passed and rep.measured_lhs == 0.0


def test_gradient_bound_helper():
    F = np.random.default_rng(0).normal(scale=5.0, size=(50, 2))
    assert V_gradient_bound_ok(F)
