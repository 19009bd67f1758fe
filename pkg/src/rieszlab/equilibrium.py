"""The extremal problem over cap weights: Phi(alpha) = lambda m max alpha + int V(R mu^alpha) dmu^alpha
under the mass constraint, its minimizer and the first-order check."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .measure import CapSum, GridField, GridSpec
from .profiles import V_eval, V_grad
from .reports import EstimateReport
from .riesz import adjoint_fft, transform_fft


class InadmissibleWeightsError(ValueError):
    pass


class CapSystem:
    """Per-cap grid densities and fields, so that every weighted combination is a linear sum."""

    def __init__(self, caps: CapSum, s: float, spec: GridSpec, m: float | None = None):
        if len(caps) == 0:
            raise ValueError("no caps")
        if spec.h > caps.radii.min() / 4:
            raise ValueError(f"grid spacing {spec.h:.4g} does not resolve the smallest cap radius {caps.radii.min():.4g}")
        self.caps, self.s, self.spec = caps, s, spec
        k = len(caps)
        self.rho = np.empty((k, spec.n, spec.n))
        self.fields = np.empty((k, 2, spec.n, spec.n))
        for j in range(k):
            onehot = np.zeros(k)
            onehot[j] = 1.0
            dens = caps.rasterize(spec, onehot)
            self.rho[j] = dens.data
            self.fields[j] = transform_fft(dens, s).data
        self.cap_mass = caps.masses.astype(float)
        self.total = float(self.cap_mass.sum())
        self.m = 0.5 * self.total if m is None else float(m)

    def __len__(self):
        return len(self.cap_mass)

    def check(self, alpha, allow_zero: bool = False) -> np.ndarray:
        a = np.asarray(alpha, dtype=float)
        if a.shape != (len(self),):
            raise InadmissibleWeightsError(f"expected {len(self)} weights, got shape {a.shape}")
        if np.any(a < 0):
            raise InadmissibleWeightsError("weights must be non-negative")
        if allow_zero and not np.any(a):
            return a
        mass = float(a @ self.cap_mass)
        if abs(mass - self.total) > 1e-10 * self.total:
            raise InadmissibleWeightsError(f"mass constraint violated: {mass:.12g} != {self.total:.12g}")
        return a

    def project(self, alpha) -> np.ndarray:
        a = np.maximum(np.asarray(alpha, dtype=float), 0.0)
        return a * (self.total / float(a @ self.cap_mass))

    def field(self, alpha) -> np.ndarray:
        return np.tensordot(alpha, self.fields, axes=1)

    def density(self, alpha) -> np.ndarray:
        return np.tensordot(alpha, self.rho, axes=1)

    def energy(self, alpha) -> float:
        F = self.field(alpha)
        return float(np.sum(V_eval(np.moveaxis(F, 0, -1)) * self.density(alpha)) * self.spec.h ** 2)

    def first_order_integrand(self, alpha) -> tuple[np.ndarray, np.ndarray]:
        """V(R mu^a) + R*(grad V(R mu^a) mu^a) on the grid, and |grad V| for the bound check."""
        F = np.moveaxis(self.field(alpha), 0, -1)
        g = V_grad(F)
        eta = np.moveaxis(g, -1, 0) * self.density(alpha)[None]
        u = adjoint_fft(GridField(self.spec, eta), self.s)
        return V_eval(F) + u, np.hypot(g[..., 0], g[..., 1])


def phi_eval(alpha, lam: float, system: CapSystem) -> float:
    a = system.check(alpha, allow_zero=True)
    if not np.any(a):
        return 0.0
    return lam * system.m * float(a.max()) + system.energy(a)


@dataclass
class Weights:
    a: np.ndarray
    lam: float
    phi: float
    trace: list = field(default_factory=list)  # (iter, phi, max alpha, constraint residual)
    converged: bool = True
    local_minima: list = field(default_factory=list)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "phi", "max_alpha", "constraint_residual"])
        for row in self.trace:
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
        return buf.getvalue()


def _descend(system: CapSystem, lam: float, a: np.ndarray, max_iters: int, tol: float):
    """Projected coordinate descent: scale one weight by (1 +/- t), renormalize the mass, halve t on failure."""
    phi = phi_eval(a, lam, system)
    trace = [(0, phi, float(a.max()), abs(float(a @ system.cap_mass)) / system.total - 1.0)]
    t = 0.5
    it = 0
    while it < max_iters:
        improved = False
        top = int(np.argmax(a))  # lowest index among ties
        order = [j for j in range(len(a)) if j != top] + [top]
        for j in order:
            for sign in (1.0, -1.0):
                trial = a.copy()
                trial[j] = a[j] * (1 + sign * t) if a[j] > 0 else (t * a.max() if sign > 0 else 0.0)
                if not np.any(trial):
                    continue
                trial = system.project(trial)
                val = phi_eval(trial, lam, system)
                if val < phi - 1e-15 * max(abs(phi), 1.0):
                    a, phi, improved = trial, val, True
                    break
        it += 1
        resid = float(a @ system.cap_mass) / system.total - 1.0
        trace.append((it, phi, float(a.max()), resid))
        if not improved:
            if t < tol:
                return a, phi, trace, True
            t *= 0.5
    return a, phi, trace, False


def minimize_phi(lam: float, system: CapSystem, max_iters: int = 400, starts: int = 3, seed: int = 0,
                 tol: float = 1e-7) -> Weights:
    """Best of several seeded starts (the first is the uniform vector)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    rng = np.random.default_rng(seed)
    k = len(system)
    inits = [np.ones(k)] + [rng.uniform(0.5, 1.5, k) for _ in range(max(starts, 1) - 1)]
    results = []
    for a0 in inits:
        results.append(_descend(system, lam, system.project(a0), max_iters, tol))
    best = min(range(len(results)), key=lambda i: (results[i][1], i))
    a, phi, trace, ok = results[best]
    minima = []
    for r in results:
        if not any(np.allclose(r[0], q, atol=1e-4) for q in minima):
            minima.append(r[0])
    return Weights(a, lam, phi, trace, ok, minima)


def first_order_residual(a, lam: float, j: int, system: CapSystem, bundle=None, tol: float = 1e-6) -> EstimateReport:
    """I_j = int [V(R mu^a) + R*(grad V(R mu^a) mu^a)] dmu_j against 6 lambda mu_j(R^2)."""
    a = system.check(a)
    if a[j] <= 0:
        return EstimateReport("first_order", 0.0, 0.0, 0.0, True, metadata={"skipped": "a_j = 0", "j": j})
    G, gradnorm = system.first_order_integrand(a)
    h2 = system.spec.h ** 2
    I = float(np.sum(G * system.rho[j]) * h2)
    rhs = 6 * lam * system.cap_mass[j]
    phi = phi_eval(a, lam, system)
    meta = {"j": j, "lambda": lam, "phi": phi, "sharp_rhs": 3 * phi * system.cap_mass[j] / system.total,
            "max_grad_V": float(gradnorm.max())}
    if bundle is not None:
        supp = system.density(a) > 0
        Lam = float(G[supp].max())
        F = np.moveaxis(system.field(a), 0, -1)
        Psi = bundle.Psi.data
        meta.update({"Lambda": Lam, "Lambda_times_I": Lam * float(Psi.sum() * h2),
                     "int_V_Psi": float(np.sum(V_eval(F) * Psi) * h2),
                     "int_Rstar_Psi": float(np.sum((G - V_eval(F)) * Psi) * h2)})
    return EstimateReport("first_order", I, rhs, I / rhs if rhs > 0 else np.inf,
                          I <= rhs + tol * max(abs(rhs), 1.0), metadata=meta)
