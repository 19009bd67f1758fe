"""The twelve acceptance criteria, each at its stated tolerance; one PASS/FAIL line per criterion
is printed at the end of the session."""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from rieszlab import cli
from rieszlab.cantor import energy_growth, structure_from_cantor
from rieszlab.equilibrium import CapSystem, first_order_residual, minimize_phi
from rieszlab.measure import Atomic, CapSum, GridField, GridSpec, Gridded, make_cantor_square
from rieszlab.profiles import build_standard_cap, decay_slope, legendre, legendre_dual, v_eval
from rieszlab.riesz import transform_direct, transform_fft
from rieszlab.topcover import (admissible_corpus, build_psi_bundle, build_top_cover, check_psi_lower,
                               g_l2_norm, jensen_lower)
from rieszlab.verify import (Claim3Settings, claim1_check, claim3_lower, gram_matrix, holder_check,
                             max_principle_check, nu_g_corpus, reproduction_check, smooth_eta_corpus)

DEMOS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def gaussian(sig):
    return lambda X, Y: np.exp(-(X ** 2 + Y ** 2) / (2 * sig * sig))


def test_01_spectral_direct_agreement(record):
    spec = GridSpec(4.0, 256)
    f = GridField.from_function(spec, gaussian(0.5))
    idx = np.arange(64, 192, 4)
    pts = np.array([[spec.axis[i], spec.axis[j]] for i in idx for j in idx])
    errs, times = [], []
    for s in (1.2, 1.5, 1.8):
        t0 = time.perf_counter()
        F = transform_fft(f, s).data
        times.append(time.perf_counter() - t0)
        D = transform_direct(Gridded(f), s, pts)
        Ff = np.column_stack([F[0][np.ix_(idx, idx)].ravel(), F[1][np.ix_(idx, idx)].ravel()])
        errs.append(float(np.linalg.norm(Ff - D) / np.linalg.norm(D)))
    ok = max(errs) <= 0.02 and max(times) <= 10
    record(1, "spectral/direct agreement", ok,
           f"rel L2 {['%.2e' % e for e in errs]} (<= 2%), fft time max {max(times):.2f}s")
    assert ok


def test_02_scaling_law(record):
    rng = np.random.default_rng(2)
    s = 1.5
    mu = Atomic(rng.normal(size=(12, 2)), rng.uniform(0.1, 1, 12))
    x = rng.normal(size=(20, 2)) * 3
    c = np.array([0.3, -1.1])
    atomic = 0.0
    for r in (0.5, 2.0, 3.7):
        lhs = transform_direct(Atomic(c + r * mu.points, mu.weights), s, c + r * x)
        rhs = r ** (-s) * transform_direct(mu, s, x)
        atomic = max(atomic, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))))
    spec = GridSpec(4.0, 128)
    f = GridField.from_function(spec, gaussian(0.4))
    base = transform_fft(f, s).data
    shift = (6, -4)  # translation by whole cells
    gridded = 0.0
    for r in (0.5, 2.0):
        moved = np.roll(f.data, shift, axis=(0, 1))
        out = transform_fft(GridField(GridSpec(r * spec.L, spec.n), moved), s).data
        ref = r ** (2 - s) * np.roll(base, shift, axis=(1, 2))
        inner = np.s_[:, 32:96, 32:96]
        gridded = max(gridded, float(np.linalg.norm(out[inner] - ref[inner]) / np.linalg.norm(ref[inner])))
    ok = atomic <= 1e-10 and gridded <= 1e-3
    record(2, "scaling law", ok, f"atomic {atomic:.1e} (<= 1e-10), gridded {gridded:.1e} (<= 1e-3)")
    assert ok


def test_03_cap_identity(record):
    s = 1.5
    cap = build_standard_cap(s, GridSpec(16.0, 512))
    slope = decay_slope(s)
    ok = cap.identity_error <= 0.01 and abs(slope + (4 - s)) <= 0.3 and abs(cap.slope + (4 - s)) <= 0.3
    record(3, "cap identity", ok,
           f"max rel err {cap.identity_error:.2e} (<= 1%), tail slope {slope:.3f} / grid fit {cap.slope:.3f} "
           f"(target {-(4 - s)} +- 0.3)")
    assert ok


def test_04_reproduction(record):
    spec = GridSpec(6.0, 256)
    p = GridField.from_function(spec, lambda X, Y: np.exp(-(X ** 2 + Y ** 2)))
    rep = reproduction_check(p, 1.5)
    agree = rep.metadata["paths_agreement"]
    ok = rep.measured_lhs <= 0.02 and agree <= 0.01
    record(4, "reproduction formula", ok, f"rel L2 {rep.measured_lhs:.2e} (<= 2%), paths differ {agree:.2e} (<= 1%)")
    assert ok


def test_05_maximum_principle(record):
    spec = GridSpec(4.0, 128)
    plain = 0
    for s in (1.25, 1.75):
        for eta in smooth_eta_corpus(100, 0, spec):
            plain += not max_principle_check(eta, s).passed
    vfail = sum(not max_principle_check(None, 1.5, nu=nu, g=g).passed for nu, g in nu_g_corpus(25, 0, spec))
    ok = plain == 0 and vfail == 0
    record(5, "maximum principle", ok, f"{plain} failures in 200 eta cases, {vfail} in 25 (nu, g) cases")
    assert ok


def test_06_cantor_energy_growth(record, derived):
    t0 = time.perf_counter()
    cs = make_cantor_square(1.5, 5, 8.0)
    rows = energy_growth(cs, [2, 3, 4, 5], cs.dimension)
    per = [r["energy_per_level"] for r in rows]
    spread = max(per) / min(per) - 1
    G, _, _ = gram_matrix(structure_from_cantor(cs, 5, cs.dimension))
    d = np.diag(G)
    ratio = float(np.max(np.abs(G - np.diag(d)) / np.minimum.outer(d, d)))
    elapsed = time.perf_counter() - t0
    # the loop oracle on the three-generation square
    c3 = make_cantor_square(1.5, 3, 8.0)
    frozen = [derived[("cantor_energy", f'{{"N": {N}, "g": 3, "kappa": 8.0, "s": 1.5}}')]["value"] for N in (1, 2, 3)]
    fast = [r["energy"] for r in energy_growth(c3, [1, 2, 3], c3.dimension)]
    oracle_ok = np.allclose(fast, frozen, rtol=1e-10)
    ok = spread <= 0.25 and ratio <= 0.1 and elapsed <= 60 and oracle_ok
    record(6, "Cantor energy growth", ok,
           f"energy/N {['%.4f' % p for p in per]} spread {spread:.3f} (<= 0.25), Gram off-diag ratio {ratio:.4f} "
           f"(<= 0.1), {elapsed:.2f}s, oracle match {oracle_ok}")
    assert ok


@pytest.mark.slow
def test_07_claims_harness(record):
    cs = make_cantor_square(1.5, 3, 8.0)
    st = structure_from_cantor(cs, 2, s=1.5)
    c1 = claim1_check(st, 1.5)
    G, c2, residuals = gram_matrix(st, 1.5)
    coarse = claim3_lower(st, 0, 1.5, Claim3Settings(grid_n=256))
    fine = claim3_lower(st, 0, 1.5, Claim3Settings(grid_n=2 * coarse.metadata["cells"][0]["grid_n"]))
    lb0, lb1 = coarse.bound_rhs, fine.bound_rhs
    stable = abs(lb1 - lb0) <= 0.25 * abs(lb0)
    ok = c1.passed and residuals.max() <= 1e-10 and c2.passed and lb0 > 0 and lb1 > 0 and stable
    record(7, "claims harness", ok,
           f"claim1 {c1.passed}, residual {residuals.max():.1e}, claim2 {c2.passed} (C={c2.empirical_constant:.3g}), "
           f"claim3 lower bound {lb0:.4g} -> {lb1:.4g} (positive: {lb0 > 0 and lb1 > 0}, refinement stable: {stable})")
    assert ok


def test_08_psi_machinery(record):
    s = 1.5
    cs = make_cantor_square(s, 5, 1.0)
    mu = cs.measure
    cover = build_top_cover(mu, s, cs.cell_side(3) * math.sqrt(2) / 2, 1e3)
    reach = 1.05 * float(np.max(np.abs(cover.centers)) + 8 * cover.radii.max())
    bundle = build_psi_bundle(cover, GridSpec(reach, 256), 8, s=s)
    total = cover.tilde_masses.sum()
    integ = max(abs(P.integral() / total - 1) for P in bundle.Psi_A.values())
    m = 0.5 * mu.weights.sum()
    corpus = admissible_corpus(cover, 10, 0, atoms_per_set=1)
    lower = sum(check_psi_lower(nu, cover, bundle, m).passed for nu in corpus)
    jensen = sum(jensen_lower(nu, bundle, m).passed for nu in corpus)
    g = [g_l2_norm(cover, A, mu) / m for A in (2, 4, 8)]
    spread = max(g) / min(g) - 1
    ok = integ <= 1e-6 and lower == 10 and jensen == 10 and spread <= 0.2
    record(8, "Psi machinery", ok,
           f"int Psi_A error {integ:.1e}, psi-lower {lower}/10, Jensen {jensen}/10, "
           f"g_A norms/m {['%.3f' % v for v in g]} spread {spread:.3f} (<= 0.2)")
    assert ok


def test_09_equilibrium(record):
    s = 1.5
    sym = CapSystem(CapSum(np.array([[-1.0, 0.0], [1.0, 0.0]]), [0.4, 0.4], [1.0, 1.0]), s, GridSpec(3.0, 256))
    lam = sym.energy(np.ones(2)) / sym.m
    W2 = minimize_phi(lam, sym)
    sym_err = float(np.max(np.abs(W2.a - 1)))
    caps = CapSum(np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 1.2]]), [0.3, 0.4, 0.25], [0.1, 0.07, 0.05])
    system = CapSystem(caps, s, GridSpec(3.0, 256))
    lam3 = system.energy(np.ones(3)) / system.m
    W3 = minimize_phi(lam3, system)
    active = [j for j in range(3) if W3.a[j] > 0]
    first = all(first_order_residual(W3.a, lam3, j, system).passed for j in active)
    phis = [row[1] for W in (W2, W3) for row in W.trace]
    mono = all(b <= a for W in (W2, W3) for a, b in zip([r[1] for r in W.trace], [r[1] for r in W.trace][1:]))
    resid = max(abs(row[3]) for W in (W2, W3) for row in W.trace)
    ok = sym_err <= 1e-3 and first and mono and resid <= 1e-10 and len(phis) > 2
    record(9, "equilibrium", ok,
           f"symmetric a error {sym_err:.1e}, first-order on {len(active)} active coords {first}, "
           f"monotone {mono}, constraint residual {resid:.1e}")
    assert ok


def test_10_profile_suite(record):
    t = np.linspace(0.0, 20.0, 317)
    a = np.linspace(1.0, 10.0, 317)
    T, A = np.meshgrid(t, a)
    T, A = T.ravel(), A.ravel()
    v, dv = v_eval(T), v_eval(T, 1)
    tol = 1e-12
    violations = {
        "min(t,t^2) <= v": int(np.sum(np.minimum(T, T * T) > v + tol)),
        "v <= t^2": int(np.sum(v > T * T + tol)),
        "v' <= 4": int(np.sum(dv > 4 + tol)),
        "t v' <= 2 v": int(np.sum(T * dv > 2 * v + tol * (1 + v))),
        "v(at) <= a^2 v(t)": int(np.sum(v_eval(A * T) > A * A * v + tol * (1 + A * A * v))),
        "v'^2 <= 4 v": int(np.sum(dv ** 2 > 4 * v + tol * (1 + v))),
    }
    ts = np.linspace(0.0, 2.0, 41)
    duality = float(np.max(np.abs(legendre_dual(ts) - v_eval(ts))))
    trivial = abs(legendre(1.0) - 0.25) + abs(legendre(2.0) - 1.0)
    total = sum(violations.values())
    ok = total == 0 and duality <= 1e-6 and trivial <= 1e-12 and len(T) >= 10 ** 5
    record(10, "profile suite", ok, f"{total} violations on {len(T)} points, duality error {duality:.1e} (<= 1e-6)")
    assert ok


def test_11_holder(record):
    rng = np.random.default_rng(11)
    bad = 0
    for _ in range(10 ** 4):
        k = int(rng.integers(1, 12))
        lhs, rhs = holder_check(rng.uniform(1e-3, 1, k), rng.uniform(1e-3, 1, k))
        bad += lhs < rhs * (1 - 1e-12)
    b = rng.uniform(0.1, 1, 7)
    lhs, rhs = holder_check(2.5 * b, b)
    equal = abs(lhs - rhs) <= 1e-12 * rhs
    ok = bad == 0 and equal
    record(11, "Hoelder step", ok, f"{bad} violations in 10^4 vectors, equality for proportional inputs {equal}")
    assert ok


def test_12_determinism(record, tmp_path):
    cfg = str(DEMOS / "report.toml")
    codes = [cli.main(["report", "--config", cfg, "--out", str(tmp_path / d), "--seed", "3"]) for d in ("a", "b")]
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = names == sorted(p.name for p in (tmp_path / "b").iterdir()) and all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    ok = same and codes == [0, 0] and any(n.endswith(".csv") for n in names) and any(n.endswith(".json") for n in names)
    record(12, "determinism", ok, f"{len(names)} artifacts byte-identical {same}, exit codes {codes}")
    assert ok
