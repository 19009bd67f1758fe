"""Special functions: the convex profile v, the fractional integrals K_alpha,
and the standard cap pair (phi, psi) with R*(psi m_2) = phi.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize, special
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.signal import fftconvolve

from . import _spectral
from .measure import GridField, GridSpec
from .riesz import adjoint_fft, riesz_sigma


# --------------------------------------------------------------------------
# the profile v


def _smoothstep_table(n: int = 4001):
    """q on [0,1]: 1 at 0, 0 at 1, built from the bump exp(-1/(u(1-u)))."""
    u = np.linspace(0.0, 1.0, n)
    x, w = np.polynomial.legendre.leggauss(16)

    def g(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        ok = (t > 0) & (t < 1)
        out[ok] = np.exp(-1.0 / (t[ok] * (1 - t[ok])))
        return out

    a = u[:-1, None]
    du = u[1] - u[0]
    panels = (g(a + 0.5 * du * (x[None, :] + 1)) @ w) * 0.5 * du
    cum = np.concatenate([[0.0], np.cumsum(panels)])
    return u, 1.0 - cum / cum[-1], g(u) / cum[-1]


@dataclass(frozen=True)
class VProfile:
    """v with v'' = 2 on [0,1], 2q(t-1) on [1,2] (q a smooth step from 1 to 0), 0 beyond 2."""

    n_table: int = 4001
    t: np.ndarray = field(init=False, repr=False)
    v: np.ndarray = field(init=False, repr=False)
    dv: np.ndarray = field(init=False, repr=False)
    d2v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        u, q, _ = _smoothstep_table(self.n_table)
        t = 1.0 + u
        d2 = 2.0 * q
        # integrate twice with Hermite-consistent trapezoid corrections
        dt = u[1] - u[0]
        dq = np.gradient(d2, dt)
        dv = 2.0 + np.concatenate([[0.0], np.cumsum(0.5 * dt * (d2[1:] + d2[:-1]) - dt ** 2 / 12 * (dq[1:] - dq[:-1]))])
        v = 1.0 + np.concatenate([[0.0], np.cumsum(0.5 * dt * (dv[1:] + dv[:-1]) - dt ** 2 / 12 * (d2[1:] - d2[:-1]))])
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "dv", dv)
        object.__setattr__(self, "d2v", d2)
        object.__setattr__(self, "_v", CubicHermiteSpline(t, v, dv))
        object.__setattr__(self, "_dv", CubicHermiteSpline(t, dv, d2))
        object.__setattr__(self, "_d2v", CubicSpline(t, d2))

    @property
    def slope_max(self) -> float:
        """v'(t) for t >= 2 (equal to 3 for the symmetric smooth step)."""
        return float(self.dv[-1])

    @property
    def v2(self) -> float:
        return float(self.v[-1])

    def __call__(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("v is defined for t >= 0")
        lo, mid, hi = t <= 1, (t > 1) & (t < 2), t >= 2
        out = np.empty_like(t)
        if order == 0:
            out[lo] = t[lo] ** 2
            out[mid] = self._v(t[mid])
            out[hi] = self.v2 + self.slope_max * (t[hi] - 2)
        elif order == 1:
            out[lo] = 2 * t[lo]
            out[mid] = self._dv(t[mid])
            out[hi] = self.slope_max
        elif order == 2:
            out[lo] = 2.0
            out[mid] = np.clip(self._d2v(t[mid]), 0.0, 2.0)
            out[hi] = 0.0
        else:
            raise ValueError("order must be 0, 1 or 2")
        return out if out.ndim else float(out)


@lru_cache(maxsize=1)
def default_profile() -> VProfile:
    return VProfile()


def v_eval(t, order: int = 0):
    return default_profile()(t, order)


def V_eval(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return v_eval(np.hypot(x[..., 0], x[..., 1]))


def V_grad(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    dv = np.asarray(v_eval(r, 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r > 0, dv / r, 0.0)
    return x * scale[..., None]


def legendre(tau):
    """v*(tau) = sup_t (tau t - v(t)) for tau in [0, v'(2)]."""
    prof = default_profile()
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau_arr < 0) or np.any(tau_arr > prof.slope_max + 1e-12):
        raise ValueError(f"tau outside the slope range [0, {prof.slope_max}] where v* is finite")
    out = np.empty_like(tau_arr)
    for k, a in enumerate(tau_arr):
        if a <= 2.0:
            t = a / 2.0
        elif a >= prof.slope_max:
            t = 2.0
        else:
            t = optimize.brentq(lambda x: prof(x, 1) - a, 1.0, 2.0, xtol=1e-15)
        out[k] = a * t - prof(t)
    return out if np.ndim(tau) else float(out[0])


def legendre_dual(t):
    """max over tau in the slope range of (tau t - v*(tau)); recovers v."""
    prof = default_profile()

    def one(x):
        if x <= 2:
            # the optimum is tau = v'(x); refine with a bounded search around it
            res = optimize.minimize_scalar(lambda a: -(a * x - legendre(a)), bounds=(0.0, prof.slope_max),
                                           method="bounded", options={"xatol": 1e-12})
            return max(-res.fun, float(prof(x, 1)) * x - legendre(float(prof(x, 1))))
        return prof.slope_max * x - legendre(prof.slope_max)

    arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([one(x) for x in arr])
    return out if np.ndim(t) else float(out[0])


# --------------------------------------------------------------------------
# fractional integrals


def riesz_constant_A(d: int, alpha: float) -> float:
    """A(d, alpha) = pi^{alpha - d/2} Gamma((d-alpha)/2) / Gamma(alpha/2)."""
    z = (d - alpha) / 2
    if z <= 0 and abs(z - round(z)) < 1e-12:
        raise ValueError(f"A({d}, {alpha}) sits on a pole of Gamma((d-alpha)/2)")
    return float(math.pi ** (alpha - d / 2) * special.gamma(z) * special.rgamma(alpha / 2))


def reproduction_sigma(s: float) -> float:
    """Constant in p(x) = sigma int (u(x+y) - u(x)) |y|^{s-5} dy for u the Newton potential of p."""
    return -(s - 1) * riesz_constant_A(2, 3 - s) * riesz_constant_A(2, s - 3)


def _side_angles(x0, y0, a):
    """Polar description of the exterior of [-a,a]^2 seen from (x0, y0): per side (dist, th1, th2, axis)."""
    # distance to each side and the angular interval (relative to the side normal) it subtends
    sides = []
    for normal, dist, lo_t, hi_t in (
        (0.0, a - x0, -(a + y0), a - y0),          # right side, tangential coordinate y
        (math.pi, a + x0, -(a - y0), a + y0),      # left
        (0.5 * math.pi, a - y0, -(a - x0), a + x0),  # top
        (1.5 * math.pi, a + y0, -(a + x0), a - x0),  # bottom
    ):
        sides.append((normal, dist, lo_t, hi_t))
    return sides


def _exterior_integrals(X, Y, a: float, alpha: float, tail_fn=None, n_theta: int = 32, n_t: int = 24):
    """Exact (quadrature) values of int_{R^2 \\ W} |z-x|^{-2-alpha} dz and, if tail_fn is given,
    int_{R^2 \\ W} tail_fn(z) |z-x|^{-2-alpha} dz, for W = [-a,a]^2 and x on (X, Y)."""
    xg, wg = np.polynomial.legendre.leggauss(n_theta)
    xt, wt = np.polynomial.legendre.leggauss(n_t)
    tt = 0.5 * (xt + 1)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    base = np.zeros_like(X)
    tail = np.zeros_like(X)
    for normal, dist, lo_t, hi_t in _side_angles(X, Y, a):
        # angle relative to the normal ranges over [atan(lo/dist), atan(hi/dist)]
        th1 = np.arctan2(lo_t, dist)
        th2 = np.arctan2(hi_t, dist)
        half = 0.5 * (th2 - th1)
        mid = 0.5 * (th2 + th1)
        for xk, wk in zip(xg, wg):
            th = mid + half * xk
            rho_w = dist / np.cos(th)
            base += wk * half * rho_w ** (-alpha) / alpha
            if tail_fn is not None:
                ang = normal + th
                c, s_ = np.cos(ang), np.sin(ang)
                acc = np.zeros_like(X)
                # rho = rho_w / t, t in (0, 1]
                for tj, wj in zip(tt, wt):
                    rho = rho_w / tj
                    acc += 0.5 * wj * tail_fn(X + rho * c, Y + rho * s_) * tj ** (alpha - 1)
                tail += wk * half * rho_w ** (-alpha) * acc
    return base, tail


def _lattice_difference(f: np.ndarray, h: float, alpha: float, step: int, off: int, m: int):
    """sum_{k != 0} (f(x + k step h) - f(x)) (step h)^2 |k step h|^{-2-alpha} over the window, plus the
    centre-cell Laplacian term, at the samples [off:off+m, off:off+m]."""
    n = f.shape[0]
    H = step * h
    k = np.arange(-(n - 1), n)
    keep = (k % step) == 0
    KX, KY = np.meshgrid(k * h, k * h, indexing="ij")
    r = np.hypot(KX, KY)
    with np.errstate(divide="ignore"):
        w = H ** 2 * r ** (-2 - alpha)
    w[~(keep[:, None] & keep[None, :])] = 0.0
    w[n - 1, n - 1] = 0.0
    sl = (slice(off, off + m), slice(off, off + m))
    conv_f = fftconvolve(f, w, mode="same")[sl]
    conv_1 = fftconvolve(np.ones_like(f), w, mode="same")[sl]
    c = f[sl]
    big = np.pad(f, 1, mode="edge")
    bs = (slice(off + 1, off + m + 1), slice(off + 1, off + m + 1))
    lap = (big[bs[0].start + 1:bs[0].stop + 1, bs[1]] + big[bs[0].start - 1:bs[0].stop - 1, bs[1]]
           + big[bs[0], bs[1].start + 1:bs[1].stop + 1] + big[bs[0], bs[1].start - 1:bs[1].stop - 1] - 4 * c) / h ** 2
    centre = 0.25 * lap * H ** (2 - alpha) * _spectral.cell_power_average(alpha)
    return conv_f - c * conv_1 + centre


def _difference_form(f: np.ndarray, h: float, a: float, tail_fn=None, richardson: bool = True,
                     off: int = 0, m: int | None = None) -> np.ndarray:
    """int (f(x+y) - f(x)) |y|^{-2-a} dy for samples f on a centred square window, at the samples
    [off:off+m]^2; outside the window the field is tail_fn (or zero)."""
    n = f.shape[0]
    m = n - 2 * off if m is None else m
    half = n * h / 2
    ax = -half + h * (np.arange(off, off + m) + 0.5)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    base, tail = _exterior_integrals(X, Y, half, a, tail_fn)
    c = f[off:off + m, off:off + m]
    fine = _lattice_difference(f, h, a, 1, off, m)
    if richardson:
        coarse = _lattice_difference(f, h, a, 2, off, m)
        fine = fine + (fine - coarse) / (2.0 ** (2 - a) - 1)
    return fine + tail - c * base


def _monopole(coef: float, power: float):
    def fn(zx, zy):
        return coef * (zx * zx + zy * zy) ** (power / 2)
    return fn


def frac_integral(phi: GridField, alpha: float, tail_mass: float | None = None,
                  richardson: bool = True, out_factor: int = 1):
    """K_alpha phi on the grid.

    alpha > 0: A(2, alpha) phi * |x|^{alpha-2} for the sampled density (a GridField, or an
    array on the out_factor-times wider window).
    alpha < 0: the difference form A(2, alpha) int (phi(x+y) - phi(x)) |y|^{alpha-2} dy. Outside
    the grid phi is taken as zero, or, when ``tail_mass`` is given, as the far field
    A(2, -alpha) tail_mass |z|^{-alpha-2} of K_{-alpha} applied to a density of that mass.
    """
    if not 0 < abs(alpha) < 2:
        raise ValueError("need 0 < |alpha| < 2")
    if phi.components != 1:
        raise ValueError("scalar field required")
    sp = phi.spec
    data = phi.data
    total = np.abs(data).sum()
    k = max(1, sp.n // 10)
    if alpha > 0 and total > 0 and total - np.abs(data[k:-k, k:-k]).sum() > 0.01 * total:
        warnings.warn("more than 1% of the density lies in the outer 10% frame", RuntimeWarning, stacklevel=2)
    if alpha > 0:
        out = riesz_constant_A(2, alpha) * _spectral.convolve_scalar(data, sp.h, 2 - alpha, out_factor)
        return GridField(sp, out) if out_factor == 1 else out
    a = -alpha
    tail_fn = None if tail_mass is None else _monopole(tail_mass * riesz_constant_A(2, a), a - 2)
    return GridField(sp, riesz_constant_A(2, alpha) * _difference_form(data, sp.h, a, tail_fn, richardson))


def frac_roundtrip(phi: GridField, alpha: float, window: int = 3, richardson: bool = True) -> GridField:
    """K_{-alpha} K_alpha phi on the grid of phi, via a window-times wider intermediate field."""
    sp = phi.spec
    if window < 1 or window % 2 != 1:
        raise ValueError("window factor must be odd so the grids stay aligned")
    big = _spectral.convolve_scalar(phi.data, sp.h, 2 - alpha, window) * riesz_constant_A(2, alpha)
    tail_fn = _monopole(float(phi.integral()) * riesz_constant_A(2, alpha), alpha - 2)
    off = (window - 1) * sp.n // 2
    res = _difference_form(big, sp.h, alpha, tail_fn, richardson, off, sp.n)
    return GridField(sp, riesz_constant_A(2, -alpha) * res)


# --------------------------------------------------------------------------
# the standard cap


def phi_circ(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(1.0 - (x[..., 0] ** 2 + x[..., 1] ** 2))


def phi_circ_hat(rho):
    return math.e * math.pi * np.exp(-(math.pi * np.asarray(rho, dtype=float)) ** 2)


@lru_cache(maxsize=8)
def psi_radial(s: float, r_max: float = 64.0, n_r: int = 2049, n_nodes: int = 2000):
    """Radial profile g with psi(x) = g(|x|) x/|x|, from the Hankel integral
    g(r) = -(2 pi / sigma) int_0^inf rho^{3-s} phi_hat(rho) J_1(2 pi r rho) d rho."""
    sigma = riesz_sigma(s)
    u_max = math.sqrt(2.2)  # phi_hat(rho) < 1e-20 beyond rho = 2.2
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    u = 0.5 * u_max * (x + 1)
    wu = 0.5 * u_max * w
    rho = u * u
    weight = wu * 2 * u * rho ** (3 - s) * phi_circ_hat(rho)
    r = np.linspace(0.0, r_max, n_r)
    vals = np.empty_like(r)
    for start in range(0, n_r, 256):
        rr = r[start:start + 256]
        vals[start:start + 256] = special.j1(2 * math.pi * rr[:, None] * rho[None, :]) @ weight
    vals *= -2 * math.pi / sigma
    spline = CubicSpline(r, vals)
    expo = 4.0 - s
    tail = vals[-1] * r_max ** expo

    def g(q):
        q = np.asarray(q, dtype=float)
        out = np.empty_like(q)
        inside = q <= r_max
        out[inside] = spline(q[inside])
        out[~inside] = tail * q[~inside] ** (-expo)
        return out

    return g


def psi_circ(s: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    g = psi_radial(round(s, 12))(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r > 0, g / r, 0.0)
    return x * scale[..., None]


@dataclass(frozen=True)
class StandardCap:
    s: float
    psi: GridField  # 2-vector samples of psi on the grid
    decay_constant: float  # sup |psi|(1 + |x|)^{4-s} over the grid window
    slope: float  # least-squares slope of log|psi| against log|x| on the decay window
    identity_error: float  # max relative error of R*(psi m_2) against phi inside the unit disk

    def phi(self, x):
        return phi_circ(x)

    def psi_at(self, x):
        return psi_circ(self.s, x)


def decay_slope(s: float, r_lo: float = 4.0, r_hi: float = 16.0, count: int = 64) -> float:
    r = np.geomspace(r_lo, r_hi, count)
    g = np.abs(psi_radial(round(s, 12))(r))
    return float(np.polyfit(np.log(r), np.log(g), 1)[0])


def build_standard_cap(s: float, spec: GridSpec) -> StandardCap:
    if spec.L < 16:
        raise ValueError("the grid must reach |x| = 16 (L >= 16) to hold the decay window")
    X, Y = spec.mesh()
    pts = np.stack([X, Y], axis=-1)
    field_ = np.moveaxis(psi_circ(s, pts), -1, 0)
    psi = GridField(spec, field_)
    r = np.hypot(X, Y)
    mag = np.hypot(field_[0], field_[1])
    decay = float(np.max(mag * (1 + r) ** (4 - s)))
    # least-squares slope over grid samples in the window
    win = (r >= 4) & (r <= 16) & (mag > 0)
    slope = float(np.polyfit(np.log(r[win]), np.log(mag[win]), 1)[0])
    back = adjoint_fft(psi, s)
    disk = r < 1
    err = float(np.max(np.abs(back[disk] - phi_circ(pts[disk])) / phi_circ(pts[disk])))
    return StandardCap(s, psi, decay, slope, err)
