import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszlab.measure import Atomic, CapSum, Disk, GridSpec, make_cantor_square
from rieszlab.topcover import (BudgetExceededError, PreconditionError, ResolutionError, TopCover,
                               admissible_corpus, build_psi_bundle, build_top_cover, check_admissible,
                               check_psi_lower, cover_from_disks, cover_from_json, disk_cell_fractions,
                               g_function, g_l2_norm, hl_maximal, jensen_lower, l2_psi_transform_check)


@given(st.floats(0.01, 2.0))
@settings(max_examples=20, deadline=None)
def test_single_atom_cover(r_star):
    cover = build_top_cover(Atomic(np.array([[0.3, -0.2]]), np.ones(1)), 1.5, r_star, 10.0)
    assert len(cover.radii) == 1
    assert cover.budget_used == pytest.approx(r_star ** 1.5)


def test_cantor_cover_counts():
    c = make_cantor_square(1.5, 2, 4.0)
    r = c.cell_side(2) * math.sqrt(2) / 2
    cover = build_top_cover(c.measure, 1.5, r, 10.0)
    assert len(cover.radii) == 16
    assert cover.budget_used <= 16 * (c.theta ** 2 * math.sqrt(2) / 2) ** 1.5 * (1 + 1e-12)
    assert cover.tilde_masses.sum() == pytest.approx(1.0)


def test_budget_exceeded():
    X = np.random.default_rng(0).uniform(-1, 1, (2000, 2))
    with pytest.raises(BudgetExceededError):
        build_top_cover(Atomic(X, np.full(2000, 1 / 2000)), 1.5, 0.01, 0.5)


def test_cover_json_roundtrip():
    c = make_cantor_square(1.5, 2, 4.0)
    cover = build_top_cover(c.measure, 1.5, 0.2, 10.0)
    back = cover_from_json(cover.to_json(), 1.5)
    assert np.allclose(back.radii, cover.radii) and np.allclose(back.tilde_masses, cover.tilde_masses)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.05, 1.5))
@settings(max_examples=30, deadline=None)
def test_disk_cell_fractions_sum_to_area(cx, cy, r):
    spec = GridSpec(4.0, 64)
    frac = disk_cell_fractions(spec, (cx, cy), r)
    assert frac.sum() * spec.h ** 2 == pytest.approx(math.pi * r * r, rel=1e-10)
    assert frac.min() >= -1e-12 and frac.max() <= 1 + 1e-12


def one_disk_bundle(n=256):
    cover = cover_from_disks(Atomic(np.zeros((1, 2)), np.ones(1)), 1.5, [Disk((0.0, 0.0), 1.0)])
    return cover, build_psi_bundle(cover, GridSpec(20.0, n), 8, s=1.5)


def test_one_disk_bundle():
    cover, b = one_disk_bundle()
    centre = np.argmin(np.abs(b.spec.axis - 0.3))
    assert b.Psi_A[2].data[centre, centre] == pytest.approx(1 / (4 * math.pi))
    for P in b.Psi_A.values():
        assert P.integral() == pytest.approx(1.0, rel=1e-6)
    assert b.integral() == pytest.approx(sum(A ** (1.5 - 2) for A in (2, 4, 8)), rel=1e-6)


@pytest.mark.slow
def test_c5_refinement():
    c1 = one_disk_bundle(256)[1].C5
    c2 = one_disk_bundle(512)[1].C5
    assert np.isfinite(c1) and abs(c2 - c1) <= 0.1 * c1


def test_resolution_error():
    cover = cover_from_disks(Atomic(np.zeros((1, 2)), np.ones(1)), 1.5, [Disk((0.0, 0.0), 0.05)])
    with pytest.raises(ResolutionError):
        build_psi_bundle(cover, GridSpec(2.0, 64), 4, s=1.5)


@pytest.fixture(scope="module")
def cantor_setup():
    c = make_cantor_square(1.5, 2, 4.0)
    cover = build_top_cover(c.measure, 1.5, c.cell_side(1) * math.sqrt(2) / 2, 10.0)
    bundle = build_psi_bundle(cover, GridSpec(1.6, 256), 4, s=1.5)
    return c, cover, bundle


def test_psi_lower_for_mu_itself(cantor_setup):
    c, cover, bundle = cantor_setup
    rep = check_psi_lower(c.measure, cover, bundle, 0.5)
    assert rep.passed and rep.measured_lhs >= rep.bound_rhs
    assert jensen_lower(c.measure, bundle, 0.5).passed


def test_admissible_corpus(cantor_setup):
    c, cover, bundle = cantor_setup
    for nu in admissible_corpus(cover, 3, 1):
        check_admissible(nu, cover, 0.5)
        assert check_psi_lower(nu, cover, bundle, 0.5).passed


def test_precondition_error(cantor_setup):
    c, cover, bundle = cantor_setup
    heavy = Atomic(c.measure.points, c.measure.weights * 3)
    with pytest.raises(PreconditionError):
        check_psi_lower(heavy, cover, bundle, 0.5)


def test_jensen_symmetric_zero():
    cover, b = one_disk_bundle(256)
    nu = Atomic(np.zeros((1, 2)), np.zeros(1))
    rep = jensen_lower(nu, b)
    assert rep.measured_lhs == 0 and rep.bound_rhs == 0


def test_g_function_values():
    cover = cover_from_disks(Atomic(np.zeros((1, 2)), np.ones(1)), 1.5, [Disk((0.0, 0.0), 1.0)])
    assert g_function(cover, 2, [0.0, 0.0])[0] == pytest.approx(2 ** -1.5)
    assert g_function(cover, 2, [5.0, 0.0])[0] == 0.0


def test_g_norm_bounded_for_s_dimensional_cantor():
    c = make_cantor_square(1.5, 4, 1.0)
    cover = build_top_cover(c.measure, 1.5, c.cell_side(3) * math.sqrt(2) / 2, 1e3)
    vals = [g_l2_norm(cover, A, c.measure) / 0.5 for A in (2, 4, 8)]
    assert max(vals) <= 2 * min(vals)


def test_maximal_function():
    c = make_cantor_square(1.5, 2, 4.0)
    mu = c.measure
    x = mu.points[0]
    assert hl_maximal(mu, np.ones(16), x) <= 1.0
    far = (c.labels(1) != c.labels(1)[0]).astype(float)
    small = [Disk(tuple(x), 2.0 ** -k) for k in range(3, 8)]
    assert hl_maximal(mu, far, x, small) == 0.0


def test_maximal_function_against_exhaustive_family():
    c = make_cantor_square(1.5, 2, 4.0)
    mu = c.measure
    f = np.random.default_rng(3).uniform(0, 1, 16)
    x = mu.points[5]
    fam = [Disk(tuple(x), r) for r in np.geomspace(0.01, 2, 400)]
    fast = hl_maximal(mu, f, x)
    exhaustive = hl_maximal(mu, f, x, fam)
    assert fast <= exhaustive * (1 + 1e-12) + 1e-15


def test_l2_psi_transform_single_atom():
    cover, b = one_disk_bundle(256)
    rep = l2_psi_transform_check(Atomic(np.array([[0.1, 0.2]]), np.ones(1)), b, cover, A=2)
    assert np.isfinite(rep.measured_lhs) and np.isfinite(rep.metadata["g_bound_constant"])


def test_topcover_tilde_masses_partition():
    c = make_cantor_square(1.5, 3, 4.0)
    cover = build_top_cover(c.measure, 1.5, 0.05, 10.0)
    assert isinstance(cover, TopCover)
    assert cover.tilde_masses.sum() + cover.uncovered_mass == pytest.approx(1.0)


def test_cap_measure_accepted():
    caps = CapSum(np.array([[0.0, 0.0]]), [0.3], [1.0])
    cover = build_top_cover(caps, 1.5, 0.5, 10.0)
    assert cover.tilde_masses.sum() == pytest.approx(1.0, rel=1e-3)
