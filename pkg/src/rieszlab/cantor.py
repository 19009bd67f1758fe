"""Bottom cover, the N-level Cantor structure and the partial potentials on it."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .measure import Atomic, CantorSquare, ConstructionParams, Disk, ball_mass, measure_from_dict, measure_to_dict
from .topcover import BudgetExceededError, as_atoms, build_top_cover


class NoScaleError(ValueError):
    """No t0 < rho* with mu(D(x, M t0)) <= delta t0^s was found."""


class DepthExhaustedError(ValueError):
    pass


class RecursionDegenerateError(ValueError):
    pass


class OutsideCellsError(ValueError):
    pass


# --------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class WholePlane:
    def contains(self, pts) -> np.ndarray:
        return np.ones(len(np.atleast_2d(pts)), dtype=bool)

    def to_dict(self):
        return {"kind": "plane"}


@dataclass(frozen=True)
class SquareRegion:
    lo: tuple
    side: float

    def contains(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        lo = np.asarray(self.lo)
        return np.all((p >= lo) & (p < lo + self.side), axis=1)

    def to_dict(self):
        return {"kind": "square", "lo": list(map(float, self.lo)), "side": float(self.side)}


@dataclass(frozen=True)
class OmegaRegion:
    """The eps*rho neighbourhood of (1 - 3 eps) B minus the earlier disks.

    Membership is decided by the distance to a dense sample of the thin set;
    only membership and the inner disk are ever needed.
    """

    center: tuple
    rho: float
    epsilon: float
    earlier: tuple = ()  # ((x, y, r), ...)

    def in_thin(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        c = np.asarray(self.center)
        ok = np.hypot(*(p - c).T) < (1 - 3 * self.epsilon) * self.rho
        for x, y, r in self.earlier:
            ok &= np.hypot(p[:, 0] - x, p[:, 1] - y) >= r
        return ok

    def _sample(self) -> np.ndarray:
        R = (1 - 3 * self.epsilon) * self.rho
        th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        rr = R * np.sqrt(np.linspace(0, 1, 48))
        pts = [np.asarray(self.center) + np.column_stack([np.outer(rr, np.cos(th)).ravel(),
                                                          np.outer(rr, np.sin(th)).ravel()])]
        for x, y, r in self.earlier:
            pts.append(np.column_stack([x + r * np.cos(th), y + r * np.sin(th)]) * 1.0)
        P = np.concatenate(pts)
        return P[self.in_thin(P)]

    def contains(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        out = self.in_thin(p)
        S = self._sample()
        if len(S) and not np.all(out):
            rest = ~out
            d = np.min(np.hypot(p[rest, None, 0] - S[None, :, 0], p[rest, None, 1] - S[None, :, 1]), axis=1)
            out[rest] = d < self.epsilon * self.rho
        return out

    def to_dict(self):
        return {"kind": "omega", "center": list(map(float, self.center)), "rho": float(self.rho),
                "epsilon": float(self.epsilon), "earlier": [list(map(float, e)) for e in self.earlier]}


def region_from_dict(d):
    kind = d["kind"]
    if kind == "plane":
        return WholePlane()
    if kind == "square":
        return SquareRegion(tuple(d["lo"]), d["side"])
    if kind == "omega":
        return OmegaRegion(tuple(d["center"]), d["rho"], d["epsilon"], tuple(tuple(e) for e in d["earlier"]))
    raise ValueError(f"unknown region kind {kind!r}")


# --------------------------------------------------------------------------
# bottom cover


def select_rho(mu, x, params: ConstructionParams, max_depth: int = 60, max_k: int = 2000,
               rho_star: float | None = None):
    """Scale rho(x) = t_k: t0 from a dyadic downward scan below rho*, then the first annulus-light index."""
    atoms = as_atoms(mu)
    x = np.asarray(x, dtype=float)
    s, eps, M, delta = params.s, params.epsilon, params.M, params.delta
    rho_star = params.rho_star if rho_star is None else rho_star
    d = np.hypot(atoms.points[:, 0] - x[0], atoms.points[:, 1] - x[1])
    w = atoms.weights

    def mass(r):
        return float(w[d < r].sum())

    t0 = rho_star * (1 - 1e-12)
    for _ in range(max_depth):
        if mass(M * t0) <= delta * t0 ** s:
            break
        t0 *= 0.5
    else:
        raise NoScaleError(f"no t0 below rho*={rho_star:.4g} after {max_depth} halvings")
    q = 1 - 3 * eps
    t = t0
    for k in range(max_k):
        inner = mass(t)
        if mass(t) - mass(q * t) <= 6 * eps * inner:
            rho = t
            break
        t *= q
    else:
        raise DepthExhaustedError(f"no annulus-light index within {max_k} steps")
    if mass(M * rho) > 2 * M ** s * delta * rho ** s * (1 + 1e-12):
        raise AssertionError("growth check mu(D(x, M rho)) <= 2 M^s delta rho^s failed")
    return rho, k


@dataclass
class BottomCover:
    disks: list  # B_j with non-increasing radii
    epsilon: float
    covering_number: int
    covered_mass: float
    total_mass: float
    exceptional: dict = field(default_factory=dict)

    def thin_sets(self) -> list[OmegaRegion]:
        return [OmegaRegion(tuple(D.center), D.radius, self.epsilon,
                            tuple((*B.center, B.radius) for B in self.disks[:j]))
                for j, D in enumerate(self.disks)]

    def membership(self, pts) -> np.ndarray:
        """Index j of the thin set (1 - 3 eps)B_j minus earlier B_i holding each point, -1 if none."""
        pts = np.atleast_2d(pts)
        out = np.full(len(pts), -1)
        taken = np.zeros(len(pts), dtype=bool)
        for j, D in enumerate(self.disks):
            d = np.hypot(pts[:, 0] - D.center[0], pts[:, 1] - D.center[1])
            hit = ~taken & (d < (1 - 3 * self.epsilon) * D.radius)
            out[hit] = j
            taken |= d < D.radius
        return out

    def inner_disk(self, j: int) -> Disk:
        """Deepest point of the j-th thin set (grid search) carrying a disk of radius eps*rho_j."""
        D = self.disks[j]
        R = (1 - 3 * self.epsilon) * D.radius
        g = np.linspace(-R, R, 65)
        X, Y = np.meshgrid(g, g, indexing="ij")
        P = np.column_stack([X.ravel(), Y.ravel()]) + np.asarray(D.center)
        depth = R - np.hypot(*(P - D.center).T)
        for B in self.disks[:j]:
            depth = np.minimum(depth, np.hypot(*(P - B.center).T) - B.radius)
        i = int(np.argmax(depth))
        return Disk(tuple(P[i]), self.epsilon * D.radius)


def besicovitch_select(candidates, mu=None, epsilon: float = 0.0) -> BottomCover:
    """Largest radius first; a candidate is kept when its centre is not inside an already kept disk."""
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].radius, i))
    kept: list[Disk] = []
    for i in order:
        D = candidates[i]
        c = np.asarray(D.center)
        if any(math.hypot(c[0] - K.center[0], c[1] - K.center[1]) < K.radius for K in kept):
            continue
        kept.append(D)
    probe = np.array([D.center for D in candidates], dtype=float).reshape(-1, 2)
    covered = total = 0.0
    if mu is not None:
        atoms = as_atoms(mu)
        probe = np.concatenate([probe, atoms.points])
        inside = np.zeros(len(atoms.points), dtype=bool)
        for K in kept:
            inside |= np.hypot(*(atoms.points - K.center).T) < K.radius
        covered, total = float(atoms.weights[inside].sum()), float(atoms.weights.sum())
    mult = np.zeros(len(probe), dtype=int)
    for K in kept:
        mult += np.hypot(*(probe - K.center).T) < K.radius
    return BottomCover(kept, epsilon, int(mult.max()) if len(mult) else 0, covered, total)


def covering_number(disks, pts) -> int:
    pts = np.atleast_2d(pts)
    mult = np.zeros(len(pts), dtype=int)
    for K in disks:
        mult += np.hypot(*(pts - K.center).T) < K.radius
    return int(mult.max()) if len(mult) else 0


def build_bottom_cover(mu: Atomic, params: ConstructionParams, top_disks=None, rho_star=None) -> BottomCover:
    """rho-selection at every atom (away from top-cover boundaries), then Besicovitch selection."""
    pts, w = mu.points, mu.weights
    rho_star = params.rho_star if rho_star is None else rho_star
    m = 0.5 * float(w.sum())
    exc = {"outside_top": 0.0, "near_boundary": 0.0, "bad_points": 0.0, "thin_shell": 0.0}
    usable = np.ones(len(pts), dtype=bool)
    if top_disks:
        bd = np.full(len(pts), np.inf)
        inside = np.zeros(len(pts), dtype=bool)
        for T in top_disks:
            d = np.hypot(*(pts - T.center).T)
            bd = np.minimum(bd, np.abs(d - T.radius))
            inside |= d < T.radius
        # shrink rho* until its boundary neighbourhood carries less than eps m
        while float(w[bd <= rho_star].sum()) >= params.epsilon * m and rho_star > 1e-12:
            rho_star *= 0.5
        exc["outside_top"] = float(w[~inside].sum())
        exc["near_boundary"] = float(w[inside & (bd <= rho_star)].sum())
        usable = inside & (bd > rho_star)
    cands = []
    for i in np.nonzero(usable)[0]:
        try:
            rho, _ = select_rho(mu, pts[i], params, rho_star=rho_star)
        except (NoScaleError, DepthExhaustedError):
            exc["bad_points"] += float(w[i])
            continue
        cands.append(Disk(tuple(pts[i]), rho))
    cover = besicovitch_select(cands, mu, params.epsilon)
    own = cover.membership(pts)
    exc["thin_shell"] = float(w[(own < 0) & usable].sum()) - exc["bad_points"]
    exc["thin_shell"] = max(exc["thin_shell"], 0.0)
    cover.exceptional = exc
    return cover


# --------------------------------------------------------------------------
# the structure


@dataclass
class Cell:
    level: int
    parent: int
    m: float
    H: float
    region: object
    inner: Disk | None
    atoms: np.ndarray  # indices into structure.base of the cell measure mu_j^(n)


@dataclass
class CantorStructure:
    s: float
    base: Atomic
    levels: list  # levels[n] is a list of Cell
    exceptional: list = field(default_factory=list)  # per level dict

    @property
    def N(self) -> int:
        return len(self.levels) - 1

    @property
    def m(self) -> float:
        return self.levels[0][0].m

    @property
    def H(self) -> float:
        return self.levels[0][0].H

    def prime_indices(self) -> np.ndarray:
        if not self.levels[-1]:
            return np.zeros(0, dtype=int)
        return np.sort(np.concatenate([c.atoms for c in self.levels[-1]]))

    @property
    def mu_prime(self) -> Atomic:
        idx = self.prime_indices()
        return Atomic(self.base.points[idx], self.base.weights[idx])

    def labels(self) -> np.ndarray:
        """(N+1, k) cell index at each level for every atom of mu'."""
        idx = self.prime_indices()
        pos = {int(a): i for i, a in enumerate(idx)}
        lab = np.full((self.N + 1, len(idx)), -1)
        for n, cells in enumerate(self.levels):
            for j, c in enumerate(cells):
                for a in c.atoms:
                    if int(a) in pos:
                        lab[n, pos[int(a)]] = j
        return lab

    def locate(self, x) -> list[int]:
        """Cell index at every level for a point (via region membership, then parent links)."""
        x = np.asarray(x, dtype=float)[None]
        out = []
        for n, cells in enumerate(self.levels):
            hit = [j for j, c in enumerate(cells)
                   if (n == 0 or c.parent == out[-1]) and c.region.contains(x)[0]]
            if not hit:
                raise OutsideCellsError(f"point lies in no level-{n} cell")
            out.append(hit[0])
        return out

    def check_invariants(self) -> dict:
        """The nesting, small-loss, subordination and total-count properties, per level."""
        idx = self.prime_indices()
        wp = self.base.weights
        res = {"nesting": True, "small_loss": [], "subordination": True, "total_m": [], "total_H": []}
        for n, cells in enumerate(self.levels):
            for c in cells:
                if n > 0:
                    par = self.levels[n - 1][c.parent]
                    if not np.all(np.isin(c.atoms, par.atoms)):
                        res["nesting"] = False
                inside = np.intersect1d(c.atoms, idx)
                res["small_loss"].append(bool(wp[inside].sum() >= c.m * (1 - 1e-12)))
            if n < self.N:
                res["total_m"].append(bool(sum(c.m for c in cells) >= 0.5 * self.m * (1 - 1e-12)))
                res["total_H"].append(bool(sum(c.H for c in cells) <= self.H * (1 + 1e-12)))
        # mu' is a restriction of every mu_j^(n) by construction (shared atom weights)
        res["all"] = (res["nesting"] and all(res["small_loss"]) and res["subordination"]
                      and all(res["total_m"]) and all(res["total_H"]))
        return res

    def mollify_cells(self):
        """(atom mask over mu', inner disk) pairs of the last level, for the mollifier."""
        idx = self.prime_indices()
        return [(np.isin(idx, c.atoms), c.inner) for c in self.levels[-1]]

    def to_json(self) -> str:
        levels = [[{"parent": c.parent, "m": c.m, "H": c.H, "region": c.region.to_dict(),
                    "inner": None if c.inner is None else [*map(float, c.inner.center), float(c.inner.radius)],
                    "atoms": c.atoms.tolist()} for c in cells] for cells in self.levels]
        return json.dumps({"s": self.s, "base": measure_to_dict(self.base), "levels": levels,
                           "exceptional": self.exceptional}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CantorStructure":
        d = json.loads(text)
        levels = [[Cell(n, c["parent"], c["m"], c["H"], region_from_dict(c["region"]),
                        None if c["inner"] is None else Disk(tuple(c["inner"][:2]), c["inner"][2]),
                        np.asarray(c["atoms"], dtype=int)) for c in cells] for n, cells in enumerate(d["levels"])]
        return cls(d["s"], measure_from_dict(d["base"]), levels, d["exceptional"])


def _cover_budget(mu: Atomic, s: float, r_star: float) -> float:
    try:
        return build_top_cover(mu, s, r_star, np.inf).budget_used
    except BudgetExceededError:  # pragma: no cover - infinite budget
        raise


def build_structure(mu, params: ConstructionParams, strict: bool = True, min_fraction: float = 0.25,
                    ) -> CantorStructure:
    """N-level recursion: top cover (budget bookkeeping and boundary exclusion), bottom cover,
    thin sets as the next cells, restriction, and recursion with cell-local scales."""
    if strict:
        params.validate()
    base = as_atoms(mu)
    s = params.s
    root = Cell(0, -1, params.m, params.H, WholePlane(), None, np.arange(len(base.points)))
    levels = [[root]]
    exceptional = []
    scales = {0: (params.r_star, params.rho_star)}
    for n in range(params.N):
        nxt = []
        exc = {"outside_top": 0.0, "near_boundary": 0.0, "bad_points": 0.0, "thin_shell": 0.0}
        new_scales = {}
        for j, cell in enumerate(levels[n]):
            sub = Atomic(base.points[cell.atoms], base.weights[cell.atoms])
            r_star, rho_star = scales[j]
            top = build_top_cover(sub, s, r_star, np.inf, params.epsilon)
            local = replace(params, m=cell.m, H=cell.H)
            bc = build_bottom_cover(sub, local, top.disks(), rho_star)
            for key, v in bc.exceptional.items():
                exc[key] += v
            own = bc.membership(sub.points)
            kids = []
            for b, D in enumerate(bc.disks):
                sel = own == b
                if not np.any(sel):
                    continue
                kid_atoms = cell.atoms[sel]
                kid = Atomic(base.points[kid_atoms], base.weights[kid_atoms])
                H_kid = 2 * _cover_budget(kid, s, min(r_star, 0.25 * D.radius))
                region = bc.thin_sets()[b]
                kids.append(Cell(n + 1, j, 0.5 * float(kid.weights.sum()), H_kid, region, bc.inner_disk(b), kid_atoms))
            kept = sum(2 * k.m for k in kids)
            if kept < min_fraction * float(sub.weights.sum()):
                raise RecursionDegenerateError(
                    f"level {n + 1}: cell {j} keeps {kept:.4g} of {float(sub.weights.sum()):.4g}")
            for k in kids:
                # keep M rho* well below the distance to the sibling cells
                others = [o for o in kids if o is not k]
                gap = min((float(np.min(np.hypot(base.points[k.atoms][:, None, 0] - base.points[o.atoms][None, :, 0],
                                                 base.points[k.atoms][:, None, 1] - base.points[o.atoms][None, :, 1])))
                           for o in others), default=np.inf)
                rho = k.region.rho
                new_scales[len(nxt)] = (min(r_star, 0.25 * rho),
                                        min(rho_star, rho, 0.5 * gap / params.M))
                nxt.append(k)
        levels.append(nxt)
        exceptional.append(exc)
        scales = new_scales
    return CantorStructure(s, base, levels, exceptional)


def structure_from_cantor(cs: CantorSquare, N: int, s: float | None = None) -> CantorStructure:
    """Generation-aligned structure: the level-n cells are the generation-n squares of ``cs``."""
    if not 0 <= N <= cs.generations:
        raise ValueError("N must lie between 0 and the number of generations")
    s = cs.dimension if s is None else s
    base = cs.measure
    g = cs.generations
    rad_g = cs.cell_side(g) * math.sqrt(2) / 2
    levels = []
    for n in range(N + 1):
        lab = cs.labels(n)
        side = cs.cell_side(n)
        cells = []
        for j, lo in enumerate(cs.corners[n]):
            atoms = np.nonzero(lab == j)[0]
            mass = float(base.weights[atoms].sum())
            H = 2 * len(atoms) * rad_g ** s
            region = WholePlane() if n == 0 else SquareRegion(tuple(lo), side)
            inner = Disk((lo[0] + side / 2, lo[1] + side / 2), side / 2) if n > 0 else None
            cells.append(Cell(n, j // 4 if n > 0 else -1, 0.5 * mass, H, region, inner, atoms))
        levels.append(cells)
    return CantorStructure(s, base, levels, [dict() for _ in range(N)])


# --------------------------------------------------------------------------
# partial potentials


def _kernel_matrix(P, Q, s):
    d = P[:, None, :] - Q[None, :, :]
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    with np.errstate(divide="ignore"):
        q = np.where(r2 > 0, r2, np.inf) ** (-(s + 1) / 2)
    return d * q[..., None]


def partial_potentials(structure: CantorStructure, s: float | None = None) -> np.ndarray:
    """R^(n) mu' at every atom of mu' for n = 0..N-1, shape (N, k, 2)."""
    s = structure.s if s is None else s
    mp = structure.mu_prime
    lab = structure.labels()
    N, k = structure.N, len(mp.points)
    out = np.zeros((N, k, 2))
    for start in range(0, k, 512):
        sl = slice(start, min(start + 512, k))
        Kw = _kernel_matrix(mp.points[sl], mp.points, s) * mp.weights[None, :, None]
        for n in range(N):
            mask = (lab[n][sl, None] == lab[n][None, :]) & (lab[n + 1][sl, None] != lab[n + 1][None, :])
            out[n, sl] = np.einsum("ij,ijc->ic", mask, Kw)
    return out


def partial_potential(structure: CantorStructure, n: int, x, s: float | None = None) -> np.ndarray:
    s = structure.s if s is None else s
    if not 0 <= n < structure.N:
        raise ValueError("n must lie in 0..N-1")
    x = np.asarray(x, dtype=float)
    mp = structure.mu_prime
    lab = structure.labels()
    hit = np.nonzero(np.all(mp.points == x, axis=1))[0]
    if len(hit):
        cx = lab[:, hit[0]]
    else:
        cx = np.asarray(structure.locate(x))
    mask = (lab[n] == cx[n]) & (lab[n + 1] != cx[n + 1])
    return (_kernel_matrix(x[None], mp.points[mask], s)[0] * mp.weights[mask, None]).sum(axis=0)


def tilde_R(nu, cells, x, s: float) -> np.ndarray:
    """R of nu restricted to the complement of the cell Omega(x) holding x."""
    atoms = as_atoms(nu)
    x = np.asarray(x, dtype=float)
    where = [i for i, c in enumerate(cells) if c.contains(x[None])[0]]
    if not where:
        raise OutsideCellsError("x lies in no cell")
    own = cells[where[0]].contains(atoms.points)
    keep = ~own
    return (_kernel_matrix(x[None], atoms.points[keep], s)[0] * atoms.weights[keep, None]).sum(axis=0)


def tilde_R_at(nu, cells, points, s: float) -> np.ndarray:
    """tilde_R at many points; points outside every cell raise."""
    atoms = as_atoms(nu)
    pts = np.atleast_2d(points)
    cell_of_pts = np.full(len(pts), -1)
    cell_of_atoms = np.full(len(atoms.points), -1)
    for i, c in enumerate(cells):
        cell_of_pts[(cell_of_pts < 0) & c.contains(pts)] = i
        cell_of_atoms[(cell_of_atoms < 0) & c.contains(atoms.points)] = i
    if np.any(cell_of_pts < 0):
        raise OutsideCellsError("some points lie in no cell")
    out = np.zeros((len(pts), 2))
    for start in range(0, len(pts), 512):
        sl = slice(start, min(start + 512, len(pts)))
        Kw = _kernel_matrix(pts[sl], atoms.points, s) * atoms.weights[None, :, None]
        mask = cell_of_pts[sl, None] != cell_of_atoms[None, :]
        out[sl] = np.einsum("ij,ijc->ic", mask, Kw)
    return out


def energy_growth(cs: CantorSquare, Ns, s: float | None = None) -> list[dict]:
    """int |sum_{n<N} R^(n) nu|^2 dnu for each N, on generation-aligned structures."""
    rows = []
    full = structure_from_cantor(cs, max(Ns), s)
    P = partial_potentials(full)
    w = full.mu_prime.weights
    for N in Ns:
        tot = P[:N].sum(axis=0)
        E = float(np.sum(np.sum(tot ** 2, axis=1) * w))
        rows.append({"N": N, "energy": E, "energy_per_level": E / N})
    return rows


def ball_growth_ok(mu, x, rho, params: ConstructionParams) -> bool:
    return ball_mass(mu, Disk(tuple(x), params.M * rho)) <= 2 * params.M ** params.s * params.delta * rho ** params.s
