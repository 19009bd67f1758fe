import numpy as np
import pytest

from rieszlab.measure import Atomic, make_cantor_square
from rieszlab.cantor import partial_potentials, structure_from_cantor
from rieszlab.oracle import (QuadratureSpec, generate_fixtures, oracle_version, pairwise_partial_potentials,
                             quad_transform, refine_check)


def test_single_atom_exact():
    res = quad_transform(Atomic(np.zeros((1, 2)), np.ones(1)), 1.5, (2.0, 0.0))
    assert res.error == 0 and res.value == pytest.approx([2 ** -1.5, 0.0])


def test_uniform_disk_centre_vanishes():
    disk = lambda X, Y: (np.hypot(X, Y) < 1).astype(float)
    res = quad_transform(disk, 1.5, (0.0, 0.0), QuadratureSpec(levels=(32, 64), extent=1.5))
    assert np.hypot(*res.value) <= 1e-10


def test_gaussian_error_estimate(derived):
    ref = derived[("quad_transform", '{"density": "gaussian", "point": [1.0, 0.0], "s": 1.5, "sigma": 0.5}')]
    assert ref["error"] <= 1e-4 * np.hypot(*ref["value"])


@pytest.mark.parametrize("fast, ref, tol, ok", [(1.0, 1.0, 0.02, True), (1.01, 1.0, 0.02, True), (1.05, 1.0, 0.02, False)])
def test_refine_check(fast, ref, tol, ok):
    passed, ratio = refine_check(fast, ref, tol)
    assert passed == ok
    if fast == ref:
        assert ratio == 0


def test_fixtures_are_current(derived):
    assert {v["oracle_version"] for v in derived.values()} == {oracle_version()}


def test_partial_potentials_match_loop_oracle():
    cs = make_cantor_square(1.5, 3, 8.0)
    st = structure_from_cantor(cs, 3)
    fast = partial_potentials(st)
    slow = pairwise_partial_potentials(st.mu_prime.points, st.mu_prime.weights, list(st.labels()), st.s)
    assert np.allclose(fast, slow, rtol=1e-12, atol=1e-14 * np.abs(slow).max())


@pytest.mark.slow
def test_fixture_regeneration_is_stable(derived):
    for item in generate_fixtures():
        import json
        key = (item["op"], json.dumps(item["inputs"], sort_keys=True))
        assert np.allclose(item["value"], derived[key]["value"], rtol=1e-12, atol=1e-15)
