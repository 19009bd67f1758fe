"""Top cover of an s-dimensional Cantor measure and the averaged bump Psi.

The cover uses disks about the size of a generation-3 square.  Psi_A spreads each disk's
mass over its A-fold dilate, so every Psi_A carries the same total mass.  The
weighted sum Psi dominates the single-disk bump psi up to the constant C5.
"""
import math

import numpy as np

from rieszlab.measure import GridSpec, make_cantor_square
from rieszlab.topcover import (admissible_corpus, build_psi_bundle, build_top_cover, check_psi_lower,
                               g_l2_norm, jensen_lower)

s = 1.5
square = make_cantor_square(s, 5, 1.0)
mu = square.measure
cover = build_top_cover(mu, s, square.cell_side(3) * math.sqrt(2) / 2, 1e3)
print(f"cover: {len(cover.radii)} disks of radius {cover.radii.max():.4f}, budget used {cover.budget_used:.3g}")

reach = 1.05 * float(np.max(np.abs(cover.centers)) + 8 * cover.radii.max())
bundle = build_psi_bundle(cover, GridSpec(reach, 256), 8, s=s)
total = cover.tilde_masses.sum()
for A, P in sorted(bundle.Psi_A.items()):
    print(f"A={A}:  int Psi_A / sum of masses = {P.integral() / total:.8f}")
print(f"C5 on this grid: {bundle.C5:.4f}")

m = 0.5 * mu.weights.sum()
corpus = admissible_corpus(cover, 10, 0, atoms_per_set=1)
print(f"\nlower bound through Psi holds for {sum(check_psi_lower(nu, cover, bundle, m).passed for nu in corpus)}/10 "
      f"admissible measures, Jensen step for {sum(jensen_lower(nu, bundle, m).passed for nu in corpus)}/10")
print("g_A norms relative to m:", ", ".join(f"A={A}: {g_l2_norm(cover, A, mu) / m:.3f}" for A in (2, 4, 8)))
