"""Geometric primitives and measure representations.

Three measure variants are supported: weighted atoms, sums of smooth
compactly supported caps, and densities sampled on a uniform square grid.
Everything is immutable; operations are plain functions.
"""
from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class SingularPointError(ValueError):
    """An evaluation point sits on an atom (or at the kernel origin)."""


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = pts - np.asarray(self.center)
        return np.hypot(d[:, 0], d[:, 1]) < self.radius

    def scaled(self, factor: float) -> "Disk":
        return Disk(self.center, self.radius * factor)


@dataclass(frozen=True)
class GridSpec:
    """Uniform n x n grid of cell centres covering [-L, L]^2."""

    L: float
    n: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("half extent L must be positive")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"resolution must be a power of two >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * (np.arange(self.n) + 0.5)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def points(self) -> np.ndarray:
        X, Y = self.mesh()
        return np.column_stack([X.ravel(), Y.ravel()])

    def refined(self) -> "GridSpec":
        return GridSpec(self.L, 2 * self.n)

    def index_of(self, pts) -> tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        i = np.floor((pts[:, 0] + self.L) / self.h).astype(int)
        j = np.floor((pts[:, 1] + self.L) / self.h).astype(int)
        return i, j


@dataclass(frozen=True)
class GridField:
    spec: GridSpec
    data: np.ndarray  # (n, n) scalar or (2, n, n) vector, indexed [x, y]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        n = self.spec.n
        if data.shape not in ((n, n), (2, n, n)):
            raise ValueError(f"samples of shape {data.shape} do not match a {n}x{n} grid")
        if not np.all(np.isfinite(data)):
            raise ValueError("grid samples must be finite")
        object.__setattr__(self, "data", data)

    @property
    def components(self) -> int:
        return 1 if self.data.ndim == 2 else 2

    def integral(self):
        return self.data.sum(axis=(-2, -1)) * self.spec.h ** 2

    def sample(self, pts, order: int = 1) -> np.ndarray:
        """Interpolate at arbitrary points (zero outside the grid)."""
        from scipy.ndimage import map_coordinates

        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        sp = self.spec
        coords = (pts.T + sp.L) / sp.h - 0.5
        if self.components == 1:
            return map_coordinates(self.data, coords, order=order, mode="constant", cval=0.0)
        return np.stack(
            [map_coordinates(c, coords, order=order, mode="constant", cval=0.0) for c in self.data],
            axis=-1,
        )

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable) -> "GridField":
        X, Y = spec.mesh()
        return cls(spec, np.asarray(fn(X, Y), dtype=float))


# --------------------------------------------------------------------------
# cap profile


def bump(u2):
    """exp(1 - 1/(1-|u|^2)) on the unit disk, as a function of |u|^2."""
    u2 = np.asarray(u2, dtype=float)
    out = np.zeros_like(u2)
    inside = u2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u2[inside]))
    return out


def _bump_mass() -> float:
    from scipy.special import exp1

    # pi * int_0^1 exp(1 - 1/w) dw = pi e (e^{-1} - E_1(1))
    return math.pi * math.e * (math.exp(-1.0) - float(exp1(1.0)))


BUMP_MASS = _bump_mass()


# --------------------------------------------------------------------------
# measures


@dataclass(frozen=True)
class Atomic:
    points: np.ndarray  # (k, 2)
    weights: np.ndarray  # (k,) scalar or (k, 2) vector weights

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float)).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float)
        if w.ndim == 0:
            w = w.reshape(1)
        if w.shape[0] != pts.shape[0]:
            raise ValueError("one weight per atom required")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise ValueError("atoms must have finite coordinates and weights")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def is_vector(self) -> bool:
        return self.weights.ndim == 2

    def restrict(self, mask) -> "Atomic":
        mask = np.asarray(mask)
        return Atomic(self.points[mask], self.weights[mask])

    def scaled(self, factor: float) -> "Atomic":
        return Atomic(self.points, self.weights * factor)


@dataclass(frozen=True)
class CapSum:
    """Sum of rescaled bumps; cap j has centre c_j, radius r_j and mass w_j."""

    centers: np.ndarray  # (k, 2)
    radii: np.ndarray
    masses: np.ndarray
    profile: str = "bump"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float)).reshape(-1, 2)
        r = np.atleast_1d(np.asarray(self.radii, dtype=float))
        w = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if not (len(c) == len(r) == len(w)):
            raise ValueError("centres, radii and masses must have equal length")
        if np.any(r <= 0):
            raise ValueError("cap radii must be positive")
        if self.profile != "bump":
            raise ValueError(f"unknown cap profile {self.profile!r}")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "masses", w)

    def __len__(self):
        return len(self.radii)

    def peak_density(self) -> np.ndarray:
        return self.masses / (BUMP_MASS * self.radii ** 2)

    def density(self, X, Y, weights=None) -> np.ndarray:
        """Sum of cap densities at the points (X, Y); optional per-cap multipliers."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        out = np.zeros(np.broadcast(X, Y).shape)
        amp = self.peak_density() if weights is None else self.peak_density() * np.asarray(weights)
        for (cx, cy), r, a in zip(self.centers, self.radii, amp):
            if a == 0:
                continue
            out += a * bump(((X - cx) ** 2 + (Y - cy) ** 2) / r ** 2)
        return out

    def rasterize(self, spec: GridSpec, weights=None) -> GridField:
        X, Y = spec.mesh()
        return GridField(spec, self.density(X, Y, weights))


@dataclass(frozen=True)
class Gridded:
    density: GridField

    @property
    def spec(self) -> GridSpec:
        return self.density.spec


Measure = Atomic | CapSum | Gridded


def total_mass(mu) -> float:
    if isinstance(mu, Atomic):
        return float(np.sum(mu.weights)) if not mu.is_vector else float(np.sum(np.abs(mu.weights)))
    if isinstance(mu, CapSum):
        return float(np.sum(mu.masses))
    if isinstance(mu, Gridded):
        return float(np.sum(mu.density.data) * mu.spec.h ** 2)
    raise TypeError(f"not a measure: {type(mu).__name__}")


def ball_mass(mu, d: Disk) -> float:
    """Mass of mu inside the open disk d (grid cells by the centre-in-disk rule)."""
    if isinstance(mu, Atomic):
        return float(np.sum(mu.weights[d.contains(mu.points)]))
    if isinstance(mu, Gridded):
        X, Y = mu.spec.mesh()
        inside = np.hypot(X - d.center[0], Y - d.center[1]) < d.radius
        return float(np.sum(mu.density.data[inside]) * mu.spec.h ** 2)
    if isinstance(mu, CapSum):
        # caps are either wholly inside, wholly outside, or integrated by polar quadrature
        total = 0.0
        dist = np.hypot(*(mu.centers - np.asarray(d.center)).T)
        for k in range(len(mu)):
            if dist[k] + mu.radii[k] <= d.radius:
                total += mu.masses[k]
            elif dist[k] - mu.radii[k] < d.radius:
                pts, w = cap_nodes(mu.centers[k], mu.radii[k], mu.masses[k])
                total += float(np.sum(w[d.contains(pts)]))
        return total
    raise TypeError(f"not a measure: {type(mu).__name__}")


def ball_masses(points: np.ndarray, weights: np.ndarray, centers, radii) -> np.ndarray:
    """Vectorised atomic ball masses for many disks."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),))
    out = np.empty(len(centers))
    for start in range(0, len(centers), 256):
        c = centers[start:start + 256]
        d = np.hypot(c[:, None, 0] - points[None, :, 0], c[:, None, 1] - points[None, :, 1])
        out[start:start + 256] = (d < radii[start:start + 256, None]) @ weights
    return out


def cap_nodes(center, radius, mass, n_radial: int = 12, n_angular: int = 24):
    """Polar Gauss nodes and weights integrating one cap's density."""
    t, wt = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * (t + 1.0)
    wr = 0.5 * wt * r * bump(r ** 2)
    phi = 2 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    R, P = np.meshgrid(r, phi, indexing="ij")
    pts = np.column_stack([
        center[0] + radius * (R * np.cos(P)).ravel(),
        center[1] + radius * (R * np.sin(P)).ravel(),
    ])
    w = np.repeat(wr, n_angular) * (2 * np.pi / n_angular)
    return pts, w * (mass / w.sum())


def halton(n: int, base: int) -> np.ndarray:
    out = np.empty(n)
    for i in range(n):
        f, r, k = 1.0, 0.0, i + 1
        while k > 0:
            f /= base
            r += f * (k % base)
            k //= base
        out[i] = r
    return out


def growth_constant(mu, s: float, disks: Sequence[Disk]) -> float:
    """Empirical growth constant: max over the disks of mu(D)/r^s."""
    if not disks:
        raise ValueError("need at least one disk")
    if isinstance(mu, Atomic):
        c = np.array([d.center for d in disks])
        r = np.array([d.radius for d in disks])
        return float(np.max(ball_masses(mu.points, mu.weights, c, r) / r ** s))
    return max(ball_mass(mu, d) / d.radius ** s for d in disks)


def default_growth_disks(mu: Atomic, count: int = 200, cells: Iterable[Disk] = ()) -> list[Disk]:
    """Deterministic Halton centres over the support box with log-spread radii."""
    lo = mu.points.min(axis=0)
    hi = mu.points.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-12)
    cx = lo[0] + (hi[0] - lo[0]) * halton(count, 2)
    cy = lo[1] + (hi[1] - lo[1]) * halton(count, 3)
    radii = span * 10.0 ** (-3.0 * halton(count, 5))
    return [Disk((x, y), r) for x, y, r in zip(cx, cy, radii)] + list(cells)


# --------------------------------------------------------------------------
# Cantor squares


@dataclass(frozen=True)
class CantorSquare:
    """Corner-pattern Cantor square; atoms sit at the lower-left corners of generation-g cells."""

    s: float
    generations: int
    kappa: float
    theta: float
    side: float
    measure: Atomic
    # corners[n] are the lower-left corners of the 4^n generation-n cells
    corners: tuple

    @property
    def dimension(self) -> float:
        """Similarity dimension log 4 / log(1/theta) of the limiting set."""
        return math.log(4.0) / math.log(1.0 / self.theta)

    def cell_side(self, n: int) -> float:
        return self.side * self.theta ** n

    def labels(self, n: int) -> np.ndarray:
        """Index of the generation-n cell containing each atom."""
        return np.arange(4 ** self.generations) // 4 ** (self.generations - n)

    def cell_disks(self, n: int) -> list[Disk]:
        half = 0.5 * self.cell_side(n)
        return [Disk((x + half, y + half), half * math.sqrt(2.0) * (1 + 1e-9)) for x, y in self.corners[n]]


def make_cantor_square(s: float, generations: int, kappa: float = 4.0, mass: float = 1.0,
                       side: float = 1.0) -> CantorSquare:
    if not 0 < s <= 2:
        raise ValueError("s must lie in (0, 2]")
    if generations < 0:
        raise ValueError("generations must be >= 0")
    if kappa < 1:
        raise ValueError("sparseness must be >= 1")
    theta = 4.0 ** (-1.0 / s) / kappa
    if theta > 0.5:
        raise ValueError(f"scale {theta} >= 1/2 makes sub-squares overlap")
    corners = [np.zeros((1, 2))]
    size = side
    for _ in range(generations):
        child = theta * size
        off = np.array([[0.0, 0.0], [size - child, 0.0], [0.0, size - child], [size - child, size - child]])
        corners.append((corners[-1][:, None, :] + off[None]).reshape(-1, 2))
        size = child
    pts = corners[-1]
    w = np.full(len(pts), mass / len(pts))
    return CantorSquare(s, generations, kappa, theta, side, Atomic(pts, w), tuple(corners))


# --------------------------------------------------------------------------
# mollification


def mollify(mu_prime: Atomic, cells: Sequence, epsilon: float) -> CapSum:
    """Replace the mass of mu' in each cell by a smooth cap on the cell's inner disk.

    ``cells`` holds ``(region, inner_disk)`` pairs; ``region`` is either a
    boolean mask over the atoms of ``mu_prime``, a predicate on points, or the
    precomputed mass mu'(Omega_j).
    """
    centers, radii, masses = [], [], []
    for region, inner in cells:
        if callable(region):
            m = float(np.sum(mu_prime.weights[region(mu_prime.points)]))
        elif np.ndim(region) == 0:
            m = float(region)
        else:
            m = float(np.sum(mu_prime.weights[np.asarray(region, dtype=bool)]))
        if m <= 0:
            continue
        # sup density mass/(BUMP_MASS r^2) must not exceed mass/r^2
        if BUMP_MASS < 1.0:
            raise ValueError("cap profile too concentrated for the sup-norm bound")
        centers.append(inner.center)
        radii.append(inner.radius)
        masses.append(m)
    if not masses:
        raise ValueError("no cell carries mass")
    return CapSum(np.array(centers), np.array(radii), np.array(masses), meta={"epsilon": epsilon})


# --------------------------------------------------------------------------
# JSON


def _encode_array(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _decode_array(text: str, shape) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), dtype="<f8").reshape(shape).copy()


def measure_to_dict(mu) -> dict:
    if isinstance(mu, Atomic):
        rows = np.column_stack([mu.points, mu.weights]).tolist()
        return {"variant": "atomic", "atoms": rows}
    if isinstance(mu, CapSum):
        caps = [{"c": list(map(float, c)), "r": float(r), "mass": float(w), "profile": mu.profile}
                for c, r, w in zip(mu.centers, mu.radii, mu.masses)]
        return {"variant": "caps", "caps": caps}
    if isinstance(mu, Gridded):
        sp = mu.spec
        return {"variant": "grid", "grid": {"L": sp.L, "n": sp.n, "components": mu.density.components,
                                            "data": _encode_array(mu.density.data)}}
    raise TypeError(f"not a measure: {type(mu).__name__}")


def measure_from_dict(doc: dict):
    variant = doc.get("variant")
    if variant == "atomic" or "atoms" in doc:
        a = np.asarray(doc["atoms"], dtype=float)
        if a.ndim != 2 or a.shape[1] not in (3, 4):
            raise ValueError("atoms must be rows [x, y, w] or [x, y, w1, w2]")
        w = a[:, 2] if a.shape[1] == 3 else a[:, 2:]
        return Atomic(a[:, :2], w)
    if variant == "caps" or "caps" in doc:
        caps = doc["caps"]
        return CapSum(np.array([c["c"] for c in caps]), np.array([c["r"] for c in caps]),
                      np.array([c["mass"] for c in caps]), caps[0].get("profile", "bump") if caps else "bump")
    if variant == "grid" or "grid" in doc:
        g = doc["grid"]
        spec = GridSpec(float(g["L"]), int(g["n"]))
        comps = int(g.get("components", 1))
        shape = (spec.n, spec.n) if comps == 1 else (2, spec.n, spec.n)
        return Gridded(GridField(spec, _decode_array(g["data"], shape)))
    raise ValueError(f"unrecognised measure document with keys {sorted(doc)}")


def dumps(mu) -> str:
    return json.dumps(measure_to_dict(mu), sort_keys=True)


def loads(text: str):
    return measure_from_dict(json.loads(text))


# --------------------------------------------------------------------------
# construction parameters


@dataclass(frozen=True)
class ConstructionParams:
    s: float
    N: int
    epsilon: float
    M: float
    delta: float
    m: float
    H: float
    r_star: float
    rho_star: float
    loss_constant: float = 3.0

    def violations(self) -> list[str]:
        """Human-readable list of violated parameter constraints (empty when valid)."""
        out = []
        if not 1 < self.s < 2:
            out.append(f"dimension s={self.s} must lie in (1, 2)")
        if self.N < 0 or int(self.N) != self.N:
            out.append("N must be a non-negative integer")
        if not 0 < self.epsilon <= 0.01:
            out.append(f"epsilon={self.epsilon} must lie in (0, 0.01]")
        if self.M < 6:
            out.append(f"M={self.M} must be at least 6")
        if self.delta <= 0:
            out.append("delta must be positive")
        for name in ("m", "H", "r_star", "rho_star"):
            if getattr(self, name) <= 0:
                out.append(f"{name} must be positive")
        if out:
            return out
        if (1 - self.loss_constant * self.epsilon) ** self.N < 0.5:
            out.append(f"small measure loss: (1 - C eps)^N = {(1 - self.loss_constant * self.epsilon) ** self.N:.4g} < 1/2")
        if 2 * self.M ** self.s * self.delta / self.epsilon ** self.s >= 1:
            out.append(f"inner-disk bound: 2 M^s delta / eps^s = {self.inner_ratio:.4g} must be < 1")
        if 2 * math.pi * self.M ** self.s * self.delta / self.epsilon ** 2 >= 1:
            out.append(f"mollifier growth: 2 pi M^s delta / eps^2 = "
                       f"{2 * math.pi * self.M ** self.s * self.delta / self.epsilon ** 2:.4g} must be < 1")
        return out

    @property
    def inner_ratio(self) -> float:
        return 2 * self.M ** self.s * self.delta / self.epsilon ** self.s

    @property
    def smallness(self) -> float:
        """M^{2s} delta / eps^{2+s} + 1/M, the error scale of the comparison steps."""
        return self.M ** (2 * self.s) * self.delta / self.epsilon ** (2 + self.s) + 1.0 / self.M

    def validate(self) -> "ConstructionParams":
        v = self.violations()
        if v:
            raise ValueError("; ".join(v))
        return self
