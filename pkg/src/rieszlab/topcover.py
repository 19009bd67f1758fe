"""Top cover, the psi / Psi fields built on it, the g-functions and the
non-homogeneous maximal function, together with their bound checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .measure import Atomic, CapSum, Disk, GridField, Gridded, GridSpec, cap_nodes, total_mass
from .profiles import V_eval, phi_circ, psi_circ, v_eval
from .riesz import transform_direct, transform_fft
from .reports import EstimateReport


class BudgetExceededError(ValueError):
    def __init__(self, achieved: float, budget: float):
        super().__init__(f"cover needs sum r^s = {achieved:.6g} > budget H = {budget:.6g}")
        self.achieved = achieved
        self.budget = budget


class ResolutionError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


def as_atoms(mu) -> Atomic:
    """Atomic stand-in for any measure variant (grid cells and cap quadrature nodes become atoms)."""
    if isinstance(mu, Atomic):
        return mu
    if isinstance(mu, Gridded):
        w = mu.density.data.ravel() * mu.spec.h ** 2
        keep = w != 0
        return Atomic(mu.spec.points()[keep], w[keep])
    if isinstance(mu, CapSum):
        pts, ws = zip(*(cap_nodes(c, r, m) for c, r, m in zip(mu.centers, mu.radii, mu.masses)))
        return Atomic(np.concatenate(pts), np.concatenate(ws))
    raise TypeError(f"not a measure: {type(mu).__name__}")


# --------------------------------------------------------------------------
# the cover


@dataclass(frozen=True)
class TopCover:
    s: float
    centers: np.ndarray  # (k, 2)
    radii: np.ndarray
    tilde_masses: np.ndarray  # mu(T_j minus earlier disks)
    H: float
    r_star: float
    uncovered_mass: float
    owner: np.ndarray = field(repr=False)  # first cover disk containing each atom, -1 if none

    def __len__(self):
        return len(self.radii)

    @property
    def budget_used(self) -> float:
        return float(np.sum(self.radii ** self.s))

    def disks(self) -> list[Disk]:
        return [Disk(tuple(c), r) for c, r in zip(self.centers, self.radii)]

    def to_json(self) -> str:
        rows = [{"c": [float(c[0]), float(c[1])], "r": float(r), "tilde_mass": float(m)}
                for c, r, m in zip(self.centers, self.radii, self.tilde_masses)]
        return json.dumps(rows, sort_keys=True)


def _first_owner(points, centers, radii) -> np.ndarray:
    owner = np.full(len(points), -1)
    for j in range(len(radii)):
        free = owner < 0
        d = np.hypot(points[free, 0] - centers[j, 0], points[free, 1] - centers[j, 1])
        idx = np.nonzero(free)[0][d < radii[j]]
        owner[idx] = j
    return owner


def _jitter_off_boundaries(points, centers, radii) -> np.ndarray:
    """Nudge radii up by a few ulps until no atom sits on a cover circle."""
    radii = radii.copy()
    for j in range(len(radii)):
        d = np.hypot(points[:, 0] - centers[j, 0], points[:, 1] - centers[j, 1])
        while np.any(np.abs(d - radii[j]) <= 4 * np.spacing(radii[j])):
            radii[j] = radii[j] + 8 * np.spacing(radii[j])
    return radii


def tilde_masses_of(points, weights, centers, radii):
    owner = _first_owner(points, centers, radii)
    tm = np.zeros(len(radii))
    np.add.at(tm, owner[owner >= 0], weights[owner >= 0])
    return tm, owner


def build_top_cover(mu, s: float, r_star: float, H: float, epsilon: float = 0.01) -> TopCover:
    """Quadtree-greedy cover: refine the bounding square until cell circumradii are at most r*,
    then put a radius-r* disk on every mass-carrying cell (z-order)."""
    atoms = as_atoms(mu)
    pts, w = atoms.points, atoms.weights
    if r_star <= 0:
        raise ValueError("r* must be positive")
    lo = pts.min(axis=0)
    side = max(float(np.max(pts.max(axis=0) - lo)), 1e-300) * (1 + 1e-12)
    depth = max(0, math.ceil(math.log2(side * math.sqrt(2) / 2 / r_star))) if side * math.sqrt(2) / 2 > r_star else 0
    cell = side / 2 ** depth
    ij = np.minimum(np.floor((pts - lo) / cell).astype(np.int64), 2 ** depth - 1)
    # z-order key for a deterministic depth-first ordering
    key = np.zeros(len(pts), dtype=np.int64)
    for b in range(depth):
        key |= ((ij[:, 0] >> b) & 1) << (2 * b + 1)
        key |= ((ij[:, 1] >> b) & 1) << (2 * b)
    cells, inverse = np.unique(key, return_inverse=True)
    mass = np.bincount(inverse, weights=w)
    keep = mass > 0
    first = np.zeros(len(cells), dtype=int)
    first[inverse[::-1]] = np.arange(len(pts))[::-1]
    centers = lo + (ij[first] + 0.5) * cell
    centers = centers[keep]
    radii = np.full(len(centers), float(r_star))
    radii = _jitter_off_boundaries(pts, centers, radii)
    used = float(np.sum(radii ** s))
    if used > H:
        raise BudgetExceededError(used, H)
    tm, owner = tilde_masses_of(pts, w, centers, radii)
    uncovered = float(w[owner < 0].sum())
    if uncovered >= epsilon * 0.5 * w.sum() and uncovered > 0:
        raise ValueError(f"uncovered mass {uncovered} is not below eps m")
    return TopCover(s, centers, radii, tm, H, float(r_star), uncovered, owner)


def cover_from_disks(mu, s: float, disks, H: float | None = None) -> TopCover:
    atoms = as_atoms(mu)
    centers = np.array([d.center for d in disks], dtype=float)
    radii = _jitter_off_boundaries(atoms.points, centers, np.array([d.radius for d in disks], dtype=float))
    tm, owner = tilde_masses_of(atoms.points, atoms.weights, centers, radii)
    used = float(np.sum(radii ** s))
    return TopCover(s, centers, radii, tm, used if H is None else H, float(radii.max()),
                    float(atoms.weights[owner < 0].sum()), owner)


def cover_from_json(text: str, s: float, H: float | None = None) -> TopCover:
    rows = json.loads(text)
    c = np.array([r["c"] for r in rows], dtype=float)
    rad = np.array([r["r"] for r in rows], dtype=float)
    tm = np.array([r["tilde_mass"] for r in rows], dtype=float)
    used = float(np.sum(rad ** s))
    return TopCover(s, c, rad, tm, used if H is None else H, float(rad.max()), 0.0, np.zeros(0, dtype=int))


# --------------------------------------------------------------------------
# exact disk / cell overlap


def _quadrant_area(x, y, R):
    """Signed area of the disk D(0, R) intersected with the rectangle spanned by 0 and (x, y)."""
    sx, sy = np.sign(x), np.sign(y)
    x = np.minimum(np.abs(x), R)
    y = np.minimum(np.abs(y), R)
    tstar = np.sqrt(np.maximum(R * R - y * y, 0.0))
    a = np.minimum(x, tstar)

    def S(t):
        return 0.5 * (t * np.sqrt(np.maximum(R * R - t * t, 0.0)) + R * R * np.arcsin(np.clip(t / R, -1, 1)))

    return sx * sy * (y * a + S(x) - S(a))


def disk_cell_fractions(spec: GridSpec, center, radius) -> np.ndarray:
    """Fraction of each grid cell lying inside the disk (exact up to rounding)."""
    h = spec.h
    edges = -spec.L + h * np.arange(spec.n + 1)
    ex = edges - center[0]
    ey = edges - center[1]
    X, Y = np.meshgrid(ex, ey, indexing="ij")
    A = _quadrant_area(X, Y, radius)
    area = A[1:, 1:] - A[:-1, 1:] - A[1:, :-1] + A[:-1, :-1]
    return np.clip(area / (h * h), 0.0, 1.0)


# --------------------------------------------------------------------------
# psi and Psi


@dataclass(frozen=True)
class PsiBundle:
    s: float
    spec: GridSpec
    psi: GridField
    Psi_A: dict  # A -> GridField (cell-averaged)
    Psi: GridField
    Psi_point: np.ndarray  # Psi with centre-in-disk indicators, for pointwise ratios
    A_max: int
    C5: float
    tail_fraction: float  # share of int |psi| outside supp Psi

    @property
    def family(self) -> list[int]:
        return sorted(self.Psi_A)

    def integral(self) -> float:
        return float(self.Psi.integral())


def dyadic_family(A_max: int) -> list[int]:
    if A_max < 2 or A_max & (A_max - 1):
        raise ValueError("A_max must be a power of two >= 2")
    return [2 ** k for k in range(1, int(math.log2(A_max)) + 1)]


def build_psi_bundle(cover: TopCover, spec: GridSpec, A_max: int = 16, s: float | None = None) -> PsiBundle:
    s = cover.s if s is None else s
    if spec.h > cover.radii.min() / 4:
        raise ResolutionError(f"grid spacing {spec.h:.4g} does not resolve the smallest disk radius "
                              f"{cover.radii.min():.4g} (need h <= r_min/4)")
    family = dyadic_family(A_max)
    reach = np.max(np.abs(cover.centers), axis=1) + A_max * cover.radii
    if np.any(reach > spec.L):
        raise ResolutionError(f"the dilated disks A_max T_j leave the grid window (reach {reach.max():.4g} > L)")
    X, Y = spec.mesh()
    psi = np.zeros((2, spec.n, spec.n))
    for c, r, m in zip(cover.centers, cover.radii, cover.tilde_masses):
        if m == 0:
            continue
        local = np.stack([(X - c[0]) / r, (Y - c[1]) / r], axis=-1)
        psi += np.moveaxis(psi_circ(s, local), -1, 0) * (m / r ** 2)
    Psi_A = {}
    Psi = np.zeros((spec.n, spec.n))
    Psi_pt = np.zeros((spec.n, spec.n))
    for A in family:
        acc = np.zeros((spec.n, spec.n))
        for c, r, m in zip(cover.centers, cover.radii, cover.tilde_masses):
            if m == 0:
                continue
            height = m / (math.pi * A * A * r * r)
            acc += height * disk_cell_fractions(spec, c, A * r)
            Psi_pt += A ** (s - 2) * height * (np.hypot(X - c[0], Y - c[1]) < A * r)
        Psi_A[A] = GridField(spec, acc)
        Psi += A ** (s - 2) * acc
    mag = np.hypot(psi[0], psi[1])
    inside = Psi_pt > 0
    C5 = float(np.max(mag[inside] / Psi_pt[inside])) if np.any(inside) else float("inf")
    tail = float(mag[~inside].sum() / max(mag.sum(), 1e-300))
    return PsiBundle(s, spec, GridField(spec, psi), Psi_A, GridField(spec, Psi), Psi_pt, A_max, C5, tail)


def R_star_psi(cover: TopCover, points) -> np.ndarray:
    """Closed form of R*(psi m_2) = sum_j mu(T~_j) r_j^{-s} phi((x - c_j)/r_j)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts))
    for c, r, m in zip(cover.centers, cover.radii, cover.tilde_masses):
        out += m / r ** cover.s * phi_circ((pts - c) / r)
    return out


# --------------------------------------------------------------------------
# lower-bound chain


def _field_on_grid(nu: Atomic, s: float, spec: GridSpec) -> np.ndarray:
    pts = spec.points()
    F = transform_direct(nu, s, pts)
    return np.stack([F[:, 0].reshape(spec.n, spec.n), F[:, 1].reshape(spec.n, spec.n)])


def check_admissible(nu: Atomic, cover: TopCover, m: float) -> np.ndarray:
    nu_t, owner = tilde_masses_of(nu.points, nu.weights, cover.centers, cover.radii)
    problems = []
    if np.any(owner < 0):
        problems.append(f"{int(np.sum(owner < 0))} atoms of nu lie outside the cover")
    bad = np.nonzero(nu_t > 2 * cover.tilde_masses * (1 + 1e-12))[0]
    if len(bad):
        problems.append(f"nu(T~_j) > 2 mu(T~_j) for j in {bad.tolist()}")
    if nu.weights.sum() < m * (1 - 1e-12):
        problems.append(f"nu has mass {nu.weights.sum():.6g} < m = {m:.6g}")
    if problems:
        raise PreconditionError("; ".join(problems))
    return nu_t


def check_psi_lower(nu: Atomic, cover: TopCover, bundle: PsiBundle, m: float) -> EstimateReport:
    """C5 int |R nu| Psi >= int <R nu, psi> = int R*(psi m_2) dnu >= ... >= m^2 / (2H)."""
    nu_t = check_admissible(nu, cover, m)
    s, spec = bundle.s, bundle.spec
    F = _field_on_grid(nu, s, spec)
    h2 = spec.h ** 2
    lhs = float(np.sum(np.hypot(F[0], F[1]) * bundle.Psi.data) * h2)
    pairing = float(np.sum(F * bundle.psi.data) * h2)
    dual = float(np.sum(R_star_psi(cover, nu.points) * nu.weights))
    step = float(np.sum(cover.tilde_masses * nu_t / cover.radii ** s))
    H = cover.budget_used
    rhs = m * m / (2 * bundle.C5 * H)
    chain_ok = dual >= step * (1 - 1e-12) and step >= 0.5 * np.sum(nu_t ** 2 / cover.radii ** s) * (1 - 1e-12)
    return EstimateReport("psi_lower", lhs, rhs, bundle.C5, lhs >= rhs and chain_ok, direction="ge",
                          metadata={"pairing": pairing, "dual": dual, "tilde_sum": step,
                                    "H_used": H, "m": m, "grid": [spec.L, spec.n]})


def jensen_lower(nu: Atomic, bundle: PsiBundle, m: float | None = None) -> EstimateReport:
    spec = bundle.spec
    F = _field_on_grid(nu, bundle.s, spec)
    h2 = spec.h ** 2
    I = float(bundle.Psi.data.sum() * h2)
    absR = np.hypot(F[0], F[1])
    lhs = float(np.sum(V_eval(np.moveaxis(F, 0, -1)) * bundle.Psi.data) * h2)
    mean = float(np.sum(absR * bundle.Psi.data) * h2) / I if I > 0 else 0.0
    rhs = I * float(v_eval(mean)) if I > 0 else 0.0
    tol = 1e-12 * max(abs(lhs), 1.0)
    return EstimateReport("jensen_lower", lhs, rhs, I, lhs + tol >= rhs, direction="ge",
                          metadata={"I": I, "mean_abs_R": mean})


# --------------------------------------------------------------------------
# g-functions and the maximal function


def g_function(cover: TopCover, A: float, x) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(len(pts))
    for c, r, m in zip(cover.centers, cover.radii, cover.tilde_masses):
        inside = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) < A * r
        out += inside * (m / r ** cover.s)
    return out * A ** (-cover.s)


def g_l2_norm(cover: TopCover, A: float, mu) -> float:
    atoms = as_atoms(mu)
    g = g_function(cover, A, atoms.points)
    return float(np.sum(g * g * atoms.weights))


def hl_maximal(mu, f, x, disk_family=None, cover: TopCover | None = None) -> float:
    """sup over the family of (1/mu(3D)) int_D f dmu; terms with mu(3D) = 0 are skipped."""
    atoms = as_atoms(mu)
    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    if disk_family is None:
        d = np.hypot(atoms.points[:, 0] - x[0], atoms.points[:, 1] - x[1])
        pos = d[d > 0]
        lo = pos.min() / 2 if len(pos) else 1.0
        hi = 2 * d.max() + lo
        k0, k1 = math.floor(math.log2(lo)), math.ceil(math.log2(hi))
        disk_family = [Disk(tuple(x), 2.0 ** k) for k in range(k0, k1 + 1)]
        if cover is not None:
            disk_family += [D for D in cover.disks() if D.contains(x[None])[0]]
    best = 0.0
    for D in disk_family:
        c = np.asarray(D.center)
        d = np.hypot(atoms.points[:, 0] - c[0], atoms.points[:, 1] - c[1])
        big = float(atoms.weights[d < 3 * D.radius].sum())
        if big <= 0:
            continue
        best = max(best, float(np.sum((f * atoms.weights)[d < D.radius])) / big)
    return best


# --------------------------------------------------------------------------
# L2(mu) bound for R(Psi m_2)


def l2_psi_transform_check(mu, bundle: PsiBundle, cover: TopCover, A: int | None = None) -> EstimateReport:
    """int |R(Psi m_2)|^2 dmu with C9 = ratio to m; for a given A also the comparison field
    sum_j chi_{outside 2A T_j} R(chi_{T~_j} mu) and its discrepancy bound by the g-functions."""
    atoms = as_atoms(mu)
    m = 0.5 * total_mass(atoms)
    s = bundle.s
    RPsi = transform_fft(bundle.Psi, s).sample(atoms.points, order=3)
    value = float(np.sum(np.sum(RPsi ** 2, axis=1) * atoms.weights))
    meta = {"m": m, "grid": [bundle.spec.L, bundle.spec.n]}
    if A is not None:
        RA = transform_fft(bundle.Psi_A[A], s).sample(atoms.points, order=3)
        comp = comparison_field(atoms, cover, A)
        disc = np.hypot(*(RA - comp).T)
        bound = sum((A / Ap) * g_function(cover, Ap, atoms.points) for Ap in dyadic_family(max(A, bundle.A_max))
                    if Ap >= A)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(bound > 0, disc / bound, np.where(disc > 0, np.inf, 0.0))
        meta.update({"A": A, "discrepancy_max": float(disc.max()), "g_bound_constant": float(ratio.max())})
    return EstimateReport("l2_psi_transform", value, value / m if m > 0 else 0.0, value / m if m > 0 else 0.0,
                          bool(np.isfinite(value)), direction="report", metadata=meta)


def comparison_field(atoms: Atomic, cover: TopCover, A: float) -> np.ndarray:
    """sum_j chi_{R^2 minus 2A T_j}(x) R(chi_{T~_j} mu)(x) at the atoms."""
    s = cover.s
    owner = _first_owner(atoms.points, cover.centers, cover.radii)
    out = np.zeros((len(atoms.points), 2))
    for j, (c, r) in enumerate(zip(cover.centers, cover.radii)):
        sel = owner == j
        if not np.any(sel):
            continue
        far = np.hypot(atoms.points[:, 0] - c[0], atoms.points[:, 1] - c[1]) >= 2 * A * r
        if np.any(far):
            out[far] += transform_direct(atoms.restrict(sel), s, atoms.points[far])
    return out


def admissible_corpus(cover: TopCover, count: int, seed: int, atoms_per_set: int = 3) -> list[Atomic]:
    """Seeded measures with nu(T~_j) in [mu(T~_j)/2, 2 mu(T~_j)], each atom placed in T~_j."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        pts, ws = [], []
        for j, (c, r, mt) in enumerate(zip(cover.centers, cover.radii, cover.tilde_masses)):
            if mt <= 0:
                continue
            got = []
            while len(got) < atoms_per_set:
                q = c + r * np.sqrt(rng.uniform()) * np.array([math.cos(a := rng.uniform(0, 2 * math.pi)), math.sin(a)])
                if _first_owner(q[None], cover.centers, cover.radii)[0] == j:
                    got.append(q)
            w = rng.dirichlet(np.ones(atoms_per_set)) * mt * rng.uniform(0.5, 2.0)
            pts += got
            ws.append(w)
        out.append(Atomic(np.array(pts), np.concatenate(ws)))
    return out
