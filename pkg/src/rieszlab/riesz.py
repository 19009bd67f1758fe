"""The s-Riesz transform R, its adjoint R*, the Newton potential U and R-sharp.

Kernel: K(x) = x / |x|^{s+1}.  Fourier convention e^{-2 pi i <x, xi>}, under
which R_j has multiplier i sigma xi_j / |xi|^{3-s}.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve
from scipy.special import gamma

from . import _spectral
from .measure import Atomic, CapSum, Disk, GridField, Gridded, SingularPointError, bump, BUMP_MASS

_CHUNK = 2 ** 21


def riesz_sigma(s: float) -> float:
    """Multiplier constant: -2 pi / ((s-1) A(2, 3-s)) = -pi^{s-1} Gamma((3-s)/2) / Gamma((1+s)/2)."""
    return -math.pi ** (s - 1) * gamma((3 - s) / 2) / gamma((1 + s) / 2)


@dataclass(frozen=True)
class RieszEngine:
    s: float

    def __post_init__(self):
        if not 0 < self.s < 2:
            raise ValueError(f"s={self.s} outside (0, 2)")
        if abs(self.s - 1.0) < 1e-12:
            raise ValueError("s = 1 has no Newton potential normalisation here")

    @property
    def sigma(self) -> float:
        return riesz_sigma(self.s)

    def multiplier(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        r = np.hypot(xi[:, 0], xi[:, 1])
        out = np.zeros_like(xi, dtype=complex)
        nz = r > 0
        out[nz] = 1j * self.sigma * xi[nz] / r[nz, None] ** (3 - self.s)
        return out


def kernel(s: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    if np.any(r == 0):
        raise SingularPointError("kernel evaluated at the origin")
    return x / r[..., None] ** (s + 1)


# --------------------------------------------------------------------------
# radial field of the unit bump (unit mass, unit radius)


@lru_cache(maxsize=16)
def bump_field(s: float):
    """Radial profile F with R(b m_2)(x) = F(|x|) x/|x| for the unit-mass bump b."""
    t, wt = np.polynomial.legendre.leggauss(48)
    n_ang = 256
    om = 2 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
    c, sn = np.cos(om), np.sin(om)
    e = 2.0 - s

    ta, wa = np.polynomial.legendre.leggauss(160)

    def value(rho: float) -> float:
        # R b(x) = -int_w w int r^{1-s} b(x + r w) dr dw, x = (rho, 0)
        if rho <= 1:
            cw, sw, aw = c, sn, np.full(n_ang, 2 * np.pi / n_ang)
        else:
            # only the cone of directions around -x meets the disk
            half = math.asin(1.0 / rho)
            ang = math.pi + half * ta
            cw, sw, aw = np.cos(ang), np.sin(ang), half * wa
        b_ = 2 * rho * cw
        disc = np.maximum(b_ ** 2 - 4 * (rho ** 2 - 1), 0.0)
        sq = np.sqrt(disc)
        r_lo = np.maximum((-b_ - sq) / 2, 0.0)
        r_hi = np.maximum((-b_ + sq) / 2, 0.0)
        if rho <= 1:
            # substitution r = u^{1/(2-s)} removes the r^{1-s} singularity
            u_hi = r_hi ** e
            u = 0.5 * (t[None, :] + 1) * u_hi[:, None]
            r = u ** (1 / e)
            inner = (bump((rho + r * cw[:, None]) ** 2 + (r * sw[:, None]) ** 2) @ wt) * 0.5 * u_hi / e
        else:
            r = r_lo[:, None] + 0.5 * (t[None, :] + 1) * (r_hi - r_lo)[:, None]
            r = np.maximum(r, 1e-300)
            dens = bump((rho + r * cw[:, None]) ** 2 + (r * sw[:, None]) ** 2)
            inner = (r ** (1 - s) * dens) @ wt * 0.5 * (r_hi - r_lo)
        return -np.sum(cw * inner * aw) / BUMP_MASS

    near = np.linspace(0.0, 3.0, 601)
    far = np.geomspace(3.0, 200.0, 241)[1:]
    rho = np.concatenate([near, far])
    vals = np.array([value(r) for r in rho])
    spline = CubicSpline(rho, vals)
    tail = vals[-1] * rho[-1] ** s

    def F(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inside = r <= rho[-1]
        out[inside] = spline(r[inside])
        out[~inside] = tail * r[~inside] ** (-s)
        return out

    F.sup = float(np.max(np.abs(vals)))
    return F


def cap_transform(caps: CapSum, s: float, points, weights=None, per_cap: bool = False) -> np.ndarray:
    """R of the cap sum at points (exact radial profile, valid inside and outside caps)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    F = bump_field(round(s, 12))
    amp = caps.masses if weights is None else caps.masses * np.asarray(weights, dtype=float)
    d = pts[:, None, :] - caps.centers[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    scale = caps.radii[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        mag = amp[None, :] * scale ** (-s) * F(r / scale) / r
    mag = np.where(r > 0, mag, 0.0)
    field = d * mag[..., None]
    return field if per_cap else field.sum(axis=1)


# --------------------------------------------------------------------------
# direct summation


_GL24 = np.polynomial.legendre.leggauss(24)


def _segment_integrals(px, py, a, b, s):
    """int_a^b |(px, py - y)|^{1-s} dy for arrays of segments, split at the foot point and graded
    towards it by the substitution u = r^{2-s}."""
    t, w = _GL24
    e = 2.0 - s
    foot = np.clip(py, a, b)
    total = np.zeros(np.shape(px))
    for d0, sign in ((foot - a, -1.0), (b - foot, 1.0)):
        u_hi = np.maximum(d0, 0.0) ** e
        u = 0.5 * (t[None] + 1) * u_hi[:, None]
        dist = u ** (1 / e)
        with np.errstate(divide="ignore", invalid="ignore"):
            jac = np.where(dist > 0, dist ** (1 - e), 0.0) / e
        off = (py - foot)[:, None] - sign * dist
        with np.errstate(divide="ignore"):
            f = (px[:, None] ** 2 + off ** 2) ** ((1 - s) / 2)
        f = np.where(np.isfinite(f), f, 0.0)
        total += 0.5 * u_hi * np.sum(w * f * jac, axis=1)
    return total


def _cell_integrals(x, lo, h, s):
    """int over the squares [lo, lo+h]^2 of K(x - y) dy, via the boundary form of the potential;
    x and lo are (P, 2) arrays, the result is (P, 2)."""
    x = np.atleast_2d(x)
    lo = np.atleast_2d(lo)
    k = -1.0 / (s - 1.0)
    x0, x1 = lo[:, 0], lo[:, 0] + h
    y0, y1 = lo[:, 1], lo[:, 1] + h
    seg = _segment_integrals
    # int K_j(x - y) dy = -oint k(x - y) n_j dS
    gx = -k * (seg(x[:, 0] - x1, x[:, 1], y0, y1, s) - seg(x[:, 0] - x0, x[:, 1], y0, y1, s))
    gy = -k * (seg(x[:, 1] - y1, x[:, 0], x0, x1, s) - seg(x[:, 1] - y0, x[:, 0], x0, x1, s))
    return np.column_stack([gx, gy])


def _cell_integral(x, lo, h, s):
    return _cell_integrals(np.asarray(x, float)[None], np.asarray(lo, float)[None], h, s)[0]


def _sources(mu):
    if isinstance(mu, Atomic):
        return mu.points, mu.weights
    if isinstance(mu, Gridded):
        sp = mu.spec
        w = mu.density.data
        if w.ndim == 3:
            return sp.points(), np.column_stack([w[0].ravel(), w[1].ravel()]) * sp.h ** 2
        return sp.points(), w.ravel() * sp.h ** 2
    raise TypeError(f"unsupported measure {type(mu).__name__}")


def _exclusion_mask(exclusion, pts_chunk, idx, src):
    if exclusion is None:
        return None
    if callable(exclusion):
        return exclusion(pts_chunk, src, idx)
    disks = [exclusion[i] for i in idx]
    c = np.array([d.center for d in disks])
    r = np.array([d.radius for d in disks])
    dd = np.hypot(src[None, :, 0] - c[:, None, 0], src[None, :, 1] - c[:, None, 1])
    return dd < r[:, None]


def _pairwise_sum(points, src, weights, kind, s, exclusion=None, strict=True):
    """Chunked sum over sources; kind is 'riesz', 'adjoint' or 'potential'."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros((len(points), 2) if kind == "riesz" else len(points))
    wmag = np.abs(weights) if weights.ndim == 1 else np.abs(weights).sum(axis=1)
    step = max(1, _CHUNK // max(len(src), 1))
    power = -(s + 1) / 2 if kind != "potential" else (1 - s) / 2
    for start in range(0, len(points), step):
        idx = np.arange(start, min(start + step, len(points)))
        p = points[idx]
        dx = p[:, None, 0] - src[None, :, 0]
        dy = p[:, None, 1] - src[None, :, 1]
        r2 = dx * dx + dy * dy
        excl = _exclusion_mask(exclusion, p, idx, src)
        zero = r2 == 0
        if excl is not None:
            zero &= ~excl
        if strict and np.any(zero & (wmag > 0)[None, :]):
            raise SingularPointError("evaluation point coincides with an atom")
        with np.errstate(divide="ignore"):
            q = np.where(r2 > 0, r2, np.inf) ** power
        if excl is not None:
            q[excl] = 0.0
        if kind == "riesz":
            out[idx, 0] = (q * dx) @ weights
            out[idx, 1] = (q * dy) @ weights
        elif kind == "adjoint":
            out[idx] = -((q * dx) @ weights[:, 0] + (q * dy) @ weights[:, 1])
        else:
            out[idx] = -(q @ weights) / (s - 1)
    return out


def _gridded_own_cell(mu: Gridded, points, s, vector_weights=False):
    """Near-cell correction: over the 3x3 block around each point, replace the midpoint terms of the
    lattice sum (zero for the point's own centre) by exact cell integrals."""
    sp = mu.spec
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    i, j = sp.index_of(pts)
    corr = np.zeros((len(pts), 2))
    data = mu.density.data
    for da in (-1, 0, 1):
        for db in (-1, 0, 1):
            a, b = i + da, j + db
            ok = np.nonzero((a >= 0) & (a < sp.n) & (b >= 0) & (b < sp.n))[0]
            if len(ok) == 0:
                continue
            lo = np.column_stack([-sp.L + a[ok] * sp.h, -sp.L + b[ok] * sp.h])
            g = _cell_integrals(pts[ok], lo, sp.h, s)
            d = pts[ok] - (lo + sp.h / 2)
            r = np.hypot(d[:, 0], d[:, 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                mid = np.where(r[:, None] > 0, d / r[:, None] ** (s + 1) * sp.h ** 2, 0.0)
            if vector_weights:
                f = data[:, a[ok], b[ok]].T
                corr[ok, 0] -= np.sum(f * (g - mid), axis=1)
            else:
                corr[ok] += data[a[ok], b[ok]][:, None] * (g - mid)
    return corr


def transform_direct(mu, s: float, points, exclusion=None) -> np.ndarray:
    """Direct summation of R mu at points; optional per-point excluded region.

    ``exclusion`` is a sequence of disks (one per point) or a callable
    ``(points, sources, index) -> bool mask`` marking excluded sources.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(mu, CapSum):
        if exclusion is not None:
            raise ValueError("exclusion regions are not supported for cap sums")
        return cap_transform(mu, s, points)
    src, w = _sources(mu)
    out = _pairwise_sum(points, src, w, "riesz", s, exclusion, strict=isinstance(mu, Atomic))
    if isinstance(mu, Gridded) and exclusion is None:
        out += _gridded_own_cell(mu, points, s)
    return out


def adjoint_transform(eta, s: float, points, exclusion=None) -> np.ndarray:
    """R* eta = -sum_j R_j eta_j for a vector measure (atomic with (k,2) weights, or 2-component grid)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(eta, Atomic) and not eta.is_vector:
        raise ValueError("adjoint transform needs vector weights")
    if isinstance(eta, Gridded) and eta.density.components != 2:
        raise ValueError("adjoint transform needs a 2-component density")
    src, w = _sources(eta)
    out = _pairwise_sum(points, src, w, "adjoint", s, exclusion, strict=isinstance(eta, Atomic))
    if isinstance(eta, Gridded) and exclusion is None:
        out += _gridded_own_cell(eta, points, s, vector_weights=True)[:, 0]
    return out


def newton_potential(nu, s: float, points) -> np.ndarray:
    """U nu(x) = -(s-1)^{-1} int |x-y|^{1-s} dnu(y)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    src, w = _sources(nu)
    out = _pairwise_sum(points, src, w, "potential", s, strict=isinstance(nu, Atomic))
    if isinstance(nu, Gridded):
        sp = nu.spec
        i, j = sp.index_of(points)
        inside = (i >= 0) & (i < sp.n) & (j >= 0) & (j < sp.n)
        # own cell by an 8x8 sub-cell midpoint rule
        sub = (np.arange(8) + 0.5) / 8 * sp.h
        SX, SY = np.meshgrid(sub, sub, indexing="ij")
        for k in np.nonzero(inside)[0]:
            lo = np.array([-sp.L + i[k] * sp.h, -sp.L + j[k] * sp.h])
            d = np.hypot(points[k, 0] - lo[0] - SX, points[k, 1] - lo[1] - SY)
            own = np.sum(d ** (1 - s)) * (sp.h / 8) ** 2
            f = nu.density.data[i[k], j[k]]
            out[k] += -f * own / (s - 1)
    return out


# --------------------------------------------------------------------------
# spectral and lattice fields


def _frame_mass_check(data: np.ndarray, what: str = "density"):
    a = np.abs(data) if data.ndim == 2 else np.hypot(*data)
    total = a.sum()
    if total == 0:
        return
    n = a.shape[-1]
    k = max(1, n // 10)
    inner = a[k:n - k, k:n - k].sum()
    if (total - inner) > 0.01 * total:
        warnings.warn(f"{100 * (total - inner) / total:.2f}% of the {what} lies in the outer 10% frame; "
                      "spectral results may be inaccurate", RuntimeWarning, stacklevel=3)


def transform_fft(density: GridField, s: float, truncate: bool = True) -> GridField:
    """R(f m_2) on the grid by the Fourier multiplier of the disk-truncated kernel."""
    if density.components != 1:
        raise ValueError("transform_fft takes a scalar density")
    _frame_mass_check(density.data)
    return GridField(density.spec, _spectral.riesz_spectral(density.data, density.spec.h, s, truncate=truncate))


def adjoint_fft(eta: GridField, s: float, out_factor: int = 1) -> np.ndarray:
    if eta.components != 2:
        raise ValueError("adjoint_fft takes a 2-component field")
    _frame_mass_check(eta.data, "vector density")
    return _spectral.adjoint_spectral(eta.data, eta.spec.h, s, out_factor=out_factor)


def newton_potential_grid(density: GridField, s: float, out_factor: int = 1) -> np.ndarray:
    """U(f m_2) sampled on a grid with the same spacing and out_factor-times the extent."""
    return -_spectral.convolve_scalar(density.data, density.spec.h, s - 1, out_factor) / (s - 1)


def transform_lattice(density: GridField, s: float) -> np.ndarray:
    """Midpoint lattice sum of R(f m_2) at every cell centre (the direct sum, FFT-accelerated)."""
    sp = density.spec
    n = sp.n
    k = np.arange(-(n - 1), n) * sp.h
    KX, KY = np.meshgrid(k, k, indexing="ij")
    r = np.hypot(KX, KY)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(r > 0, r ** (-(s + 1)), 0.0) * sp.h ** 2
    out = np.empty((2, n, n))
    out[0] = fftconvolve(density.data, KX * q, mode="same")
    out[1] = fftconvolve(density.data, KY * q, mode="same")
    return out


# --------------------------------------------------------------------------
# maximal transform


def dyadic_family(x, scale_min: float, scale_max: float) -> list[Disk]:
    k0 = math.floor(math.log2(scale_min))
    k1 = math.ceil(math.log2(scale_max))
    return [Disk(tuple(x), 2.0 ** k) for k in range(k0, k1 + 1)]


def maximal_transform(nu, s: float, x, disk_family=None) -> float:
    """max over the family of |int_{R^2 minus 2D} K(x - y) dnu(y)|; every disk must contain x."""
    x = np.asarray(x, dtype=float)
    src, w = _sources(nu)
    d = x[None, :] - src
    r = np.hypot(d[:, 0], d[:, 1])
    if disk_family is None:
        pos = r[r > 0]
        if len(pos) == 0:
            return 0.0
        disk_family = dyadic_family(x, pos.min() / 4, 2 * pos.max())
    if len(disk_family) == 0:
        raise ValueError("empty disk family")
    best = 0.0
    for D in disk_family:
        if not D.contains(x[None])[0] and not np.allclose(D.center, x):
            raise ValueError("every family disk must contain x")
        outside = np.hypot(src[:, 0] - D.center[0], src[:, 1] - D.center[1]) >= 2 * D.radius
        keep = outside & (r > 0)
        if not np.any(keep):
            continue
        v = (d[keep] * (w[keep] * r[keep] ** (-(s + 1)))[:, None]).sum(axis=0)
        best = max(best, float(np.hypot(*v)))
    return best
