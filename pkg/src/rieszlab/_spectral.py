"""FFT convolution with radial power kernels truncated to a disk.

The Fourier transform of a kernel truncated at radius R is smooth, so with
enough zero padding the periodic convolution coincides with the aperiodic one
on the grid window.  All transforms use the e^{-2 pi i <x, xi>} convention.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy import special
from scipy.interpolate import CubicHermiteSpline

_SERIES_CUT = 4.0
_PANEL = 0.125


def _series(p: float, nu: int, T: np.ndarray, terms: int = 40) -> np.ndarray:
    out = np.zeros_like(T)
    for k in range(terms):
        e = 2 * k + nu + p + 1
        c = (-1) ** k / (2.0 ** (2 * k + nu) * math.factorial(k) * math.factorial(k + nu) * e)
        out += c * T ** e
    return out


@lru_cache(maxsize=32)
def _table(p: float, nu: int, tmax: float):
    t_nodes = np.arange(_SERIES_CUT, tmax + 2 * _PANEL, _PANEL)
    x, w = np.polynomial.legendre.leggauss(12)
    a = t_nodes[:-1, None]
    pts = a + 0.5 * _PANEL * (x[None, :] + 1)
    panel = 0.5 * _PANEL * (pts ** p * special.jv(nu, pts)) @ w
    vals = _series(p, nu, np.array([_SERIES_CUT]))[0] + np.concatenate([[0.0], np.cumsum(panel)])
    deriv = t_nodes ** p * special.jv(nu, t_nodes)
    return CubicHermiteSpline(t_nodes, vals, deriv)


def power_bessel_integral(p: float, nu: int, T) -> np.ndarray:
    """G(T) = int_0^T t^p J_nu(t) dt for p + nu > -1."""
    T = np.asarray(T, dtype=float)
    out = np.empty_like(T)
    small = T <= _SERIES_CUT
    out[small] = _series(p, nu, T[small])
    if np.any(~small):
        tmax = float(T[~small].max())
        # reuse tables on a coarse ladder of sizes
        tmax = 2.0 ** math.ceil(math.log2(max(tmax, 8.0)))
        out[~small] = _table(round(p, 12), nu, tmax)(T[~small])
    return out


def scalar_kernel_ft(beta: float, R: float, rho) -> np.ndarray:
    """Fourier transform of |x|^{-beta} restricted to |x| < R (radial, beta < 2)."""
    rho = np.asarray(rho, dtype=float)
    out = np.empty_like(rho)
    zero = rho == 0
    out[zero] = 2 * math.pi * R ** (2 - beta) / (2 - beta)
    r = rho[~zero]
    out[~zero] = 2 * math.pi * (2 * math.pi * r) ** (beta - 2) * power_bessel_integral(1 - beta, 0, 2 * math.pi * r * R)
    return out


def vector_kernel_ft(s: float, R: float, rho) -> np.ndarray:
    """Radial factor q with FT[x/|x|^{s+1} restricted to |x|<R] = -i (xi/|xi|) q(|xi|)."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    nz = rho > 0
    r = rho[nz]
    out[nz] = 2 * math.pi * (2 * math.pi * r) ** (s - 2) * power_bessel_integral(1 - s, 1, 2 * math.pi * r * R)
    return out


def vector_kernel_ft_limit(s: float, rho) -> np.ndarray:
    """The untruncated limit of ``vector_kernel_ft`` (Weber's integral)."""
    rho = np.asarray(rho, dtype=float)
    c = 2 * math.pi * (2 * math.pi) ** (s - 2) * 2.0 ** (1 - s) * special.gamma((3 - s) / 2) / special.gamma((1 + s) / 2)
    out = np.zeros_like(rho)
    out[rho > 0] = c * rho[rho > 0] ** (s - 2)
    return out


def _layout(n: int, out_factor: int):
    """FFT size and source offset for an n-cell source window and out_factor*n output window."""
    if out_factor < 1 or int(out_factor) != out_factor:
        raise ValueError("out_factor must be a positive integer")
    need = (1 + math.sqrt(2)) * (1 + out_factor) * n / 2 + 2
    P = sfft.next_fast_len(int(math.ceil(need)), real=True)
    P = max(P, out_factor * n)
    return P, (out_factor - 1) * n // 2


def _freqs(P: int, h: float):
    kx = sfft.fftfreq(P, d=h)
    ky = sfft.rfftfreq(P, d=h)
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    return KX, KY, np.hypot(KX, KY)


def _embed(samples: np.ndarray, P: int, offset: int) -> np.ndarray:
    n = samples.shape[-1]
    buf = np.zeros(samples.shape[:-2] + (P, P))
    buf[..., offset:offset + n, offset:offset + n] = samples
    return buf


def convolve_scalar(samples: np.ndarray, h: float, beta: float, out_factor: int = 1) -> np.ndarray:
    """sum_y f(y) |x - y|^{-beta} h^2 as a continuous convolution, on an out_factor-times wider window."""
    n = samples.shape[-1]
    P, off = _layout(n, out_factor)
    R = math.sqrt(2) * (1 + out_factor) * n * h / 2
    _, _, rho = _freqs(P, h)
    mult = scalar_kernel_ft(beta, R, rho)
    F = sfft.rfft2(_embed(samples, P, off))
    out = sfft.irfft2(F * mult, s=(P, P))
    m = out_factor * n
    return out[..., :m, :m]


def riesz_spectral(samples: np.ndarray, h: float, s: float, out_factor: int = 1, truncate: bool = True) -> np.ndarray:
    """Vector Riesz transform of a scalar density; returns shape (2, m, m)."""
    n = samples.shape[-1]
    P, off = _layout(n, out_factor)
    R = math.sqrt(2) * (1 + out_factor) * n * h / 2
    KX, KY, rho = _freqs(P, h)
    q = vector_kernel_ft(s, R, rho) if truncate else vector_kernel_ft_limit(s, rho)
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(rho > 0, KX / rho, 0.0)
        uy = np.where(rho > 0, KY / rho, 0.0)
    # odd multipliers vanish on the Nyquist lines for real output
    if P % 2 == 0:
        ux[P // 2, :] = 0.0
        uy[:, -1] = 0.0
    F = sfft.rfft2(_embed(samples, P, off))
    m = out_factor * n
    out = np.empty((2, m, m))
    for c, u in enumerate((ux, uy)):
        out[c] = sfft.irfft2(F * (-1j) * u * q, s=(P, P))[:m, :m]
    return out


def adjoint_spectral(samples: np.ndarray, h: float, s: float, out_factor: int = 1, truncate: bool = True) -> np.ndarray:
    """-sum_j R_j(eta_j) for a (2, n, n) vector density."""
    n = samples.shape[-1]
    P, off = _layout(n, out_factor)
    R = math.sqrt(2) * (1 + out_factor) * n * h / 2
    KX, KY, rho = _freqs(P, h)
    q = vector_kernel_ft(s, R, rho) if truncate else vector_kernel_ft_limit(s, rho)
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(rho > 0, KX / rho, 0.0)
        uy = np.where(rho > 0, KY / rho, 0.0)
    if P % 2 == 0:
        ux[P // 2, :] = 0.0
        uy[:, -1] = 0.0
    F = sfft.rfft2(_embed(samples, P, off))
    spec = 1j * q * (ux * F[0] + uy * F[1])
    m = out_factor * n
    return sfft.irfft2(spec, s=(P, P))[:m, :m]


def multiplier_apply(samples: np.ndarray, h: float, fn, pad: int = 2) -> np.ndarray:
    """Apply a Fourier multiplier fn(KX, KY, rho) on a pad-times zero-padded grid."""
    n = samples.shape[-1]
    P = pad * n
    KX, KY, rho = _freqs(P, h)
    F = sfft.rfft2(_embed(samples, P, 0))
    return sfft.irfft2(F * fn(KX, KY, rho), s=(P, P))[..., :n, :n]


# --------------------------------------------------------------------------
# direct (real space) sums on the grid lattice


def cell_power_average(beta: float) -> float:
    """int over [-1/2, 1/2]^2 of |y|^{-beta} dy (exact polar integral)."""
    from scipy.integrate import quad

    val, _ = quad(lambda t: (2 * math.cos(t)) ** (beta - 2), 0.0, math.pi / 4, epsabs=1e-14, epsrel=1e-13)
    return 8.0 * val / (2 - beta)


def lattice_scalar_kernel(n_off: int, h: float, beta: float) -> np.ndarray:
    """h^2 |k h|^{-beta} on offsets -n_off..n_off with the exact centre-cell value."""
    k = np.arange(-n_off, n_off + 1) * h
    KX, KY = np.meshgrid(k, k, indexing="ij")
    r = np.hypot(KX, KY)
    with np.errstate(divide="ignore"):
        w = h ** 2 * r ** (-beta)
    w[n_off, n_off] = cell_power_average(beta) * h ** (2 - beta)
    return w
