import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszlab.measure import (Atomic, CapSum, ConstructionParams, Disk, GridField, GridSpec, Gridded, ball_mass,
                              dumps, growth_constant, loads, make_cantor_square, mollify, total_mass)


def uniform(L, n):
    spec = GridSpec(L, n)
    return Gridded(GridField(spec, np.ones((n, n))))


@pytest.mark.parametrize("mu, expected", [
    (Atomic(np.zeros((1, 2)), np.ones(1)), 1.0),
    (CapSum(np.array([[0.0, 0.0], [3.0, 0.0]]), [0.2, 0.2], [0.5, 0.5]), 1.0),
    (uniform(1.0, 64), 4.0),
])
def test_total_mass(mu, expected):
    assert total_mass(mu) == pytest.approx(expected, abs=1e-12)


def test_ball_mass_atoms():
    one = Atomic(np.zeros((1, 2)), np.ones(1))
    assert ball_mass(one, Disk((0, 0), 0.5)) == 1.0
    assert ball_mass(Atomic(np.array([[2.0, 0.0]]), np.ones(1)), Disk((0, 0), 0.5)) == 0.0


def test_ball_mass_grid_against_frozen_area(derived):
    ref = derived[("ball_mass_area", '{"L": 1.0, "disk": [0, 0, 0.5], "n": 128}')]["value"]
    spec = GridSpec(1.0, 128)
    assert abs(ball_mass(uniform(1.0, 128), Disk((0, 0), 0.5)) - ref) <= 2 * spec.h


def test_growth_constant_single_atom():
    mu = Atomic(np.zeros((1, 2)), np.ones(1))
    disks = [Disk((1.0, 0.0), 1.0 + 1e-12), Disk((2.0, 0.0), 2.0 + 1e-12)]
    assert growth_constant(mu, 1.5, disks) == pytest.approx(1.0, rel=1e-9)
    assert growth_constant(mu, 1.5, [Disk((5.0, 0.0), 1.0)]) == 0.0


def test_cantor_trivial_cases():
    c = make_cantor_square(2.0, 1, 1.0)
    assert c.theta == pytest.approx(0.5)
    assert len(c.measure.points) == 4
    c0 = make_cantor_square(1.5, 0)
    assert len(c0.measure.points) == 1 and c0.measure.weights[0] == 1.0


def test_cantor_gaps(derived):
    c = make_cantor_square(1.5, 2, 4.0)
    assert len(c.measure.points) == 16
    p = c.measure.points
    d = np.hypot(*(p[:, None] - p[None]).transpose(2, 0, 1))
    np.fill_diagonal(d, np.inf)
    frozen = derived[("cantor_min_gap", '{"g": 2, "kappa": 4.0, "s": 1.5}')]["value"]
    assert d.min() == pytest.approx(frozen, rel=1e-12)
    for n in range(2):
        parent, child = c.labels(n), c.labels(n + 1)
        split = (parent[:, None] == parent[None]) & (child[:, None] != child[None])
        assert d[split].min() >= (1 - 2 * c.theta) * c.cell_side(n) - 1e-12


@given(st.floats(1.05, 1.95), st.integers(0, 3), st.floats(1.0, 6.0))
@settings(max_examples=30, deadline=None)
def test_cantor_dimension_and_mass(s, g, kappa):
    c = make_cantor_square(s, g, kappa)
    assert c.dimension == pytest.approx(math.log(4) / math.log(1 / c.theta))
    assert c.measure.weights.sum() == pytest.approx(1.0)
    assert len(c.measure.points) == 4 ** g


def test_mollify():
    mu = Atomic(np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]), np.array([0.3, 0.7, 0.0]))
    caps = mollify(mu, [(np.array([True, False, False]), Disk((0, 0), 0.1)),
                        (np.array([False, True, False]), Disk((1, 0), 0.1)),
                        (np.array([False, False, True]), Disk((5, 5), 0.1))], epsilon=0.01)
    assert len(caps) == 2  # the zero-mass cell is skipped
    assert total_mass(caps) == pytest.approx(1.0)
    one = mollify(Atomic(np.zeros((1, 2)), np.ones(1)), [(1.0, Disk((0, 0), 0.1))], 0.01)
    assert one.peak_density().max() <= 100.0


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 3)), min_size=1, max_size=8))
@settings(max_examples=40, deadline=None)
def test_json_roundtrip(rows):
    a = np.array(rows)
    mu = Atomic(a[:, :2], a[:, 2])
    back = loads(dumps(mu))
    assert np.array_equal(back.points, mu.points) and np.array_equal(back.weights, mu.weights)


@pytest.mark.parametrize("field, value", [("epsilon", 0.5), ("M", 2.0), ("s", 2.5), ("delta", -1.0)])
def test_params_violations(field, value):
    base = dict(s=1.5, N=2, epsilon=0.01, M=6.0, delta=1e-12, m=0.5, H=1.0, r_star=0.1, rho_star=0.1)
    base[field] = value
    p = ConstructionParams(**base)
    assert p.violations()
    with pytest.raises(ValueError):
        p.validate()


def test_params_valid():
    p = ConstructionParams(1.5, 2, 0.01, 6.0, 1e-12, 0.5, 1.0, 0.1, 0.1)
    assert p.violations() == [] and p.inner_ratio < 1
