"""Redistributing mass between three caps.

Phi charges lambda m times the largest weight plus the profile energy of the
field.  Starting from equal weights, coordinate descent moves mass until no
single rescaling helps.  At the minimiser, every active cap satisfies the
first-order inequality I_j <= 6 lambda mu_j.
"""
import numpy as np

from rieszlab.equilibrium import CapSystem, first_order_residual, minimize_phi
from rieszlab.measure import CapSum, GridSpec

caps = CapSum(np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 1.2]]), [0.3, 0.4, 0.25], [0.1, 0.07, 0.05])
system = CapSystem(caps, 1.5, GridSpec(3.0, 256))
lam = system.energy(np.ones(3)) / system.m
print(f"lambda = {lam:.5g}, Phi at equal weights = {lam * system.m + system.energy(np.ones(3)):.6g}")

W = minimize_phi(lam, system)
print(f"minimiser a = {np.round(W.a, 5)}, Phi = {W.phi:.6g}, {len(W.trace) - 1} sweeps, converged {W.converged}")
for j in range(3):
    rep = first_order_residual(W.a, lam, j, system)
    print(f"cap {j}: I_j = {rep.measured_lhs:.4e}   6 lambda mu_j = {rep.bound_rhs:.4e}   holds {rep.passed}")
