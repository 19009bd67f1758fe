"""How the Riesz energy of a four-corner Cantor square grows with depth.

Each generation adds a new layer of partial potentials R^(n).  Because they cancel
on average over every child square, the layers are nearly orthogonal, and the
energy of the truncated sum grows linearly in the number of layers.
"""
import numpy as np

from rieszlab.cantor import energy_growth, structure_from_cantor
from rieszlab.measure import make_cantor_square
from rieszlab.verify import gram_matrix

square = make_cantor_square(1.5, 5, 8.0)
print(f"{len(square.measure.points)} atoms, Hausdorff dimension {square.dimension:.3f}")

# The kernel exponent matches the dimension so every level contributes the same amount.
for row in energy_growth(square, [1, 2, 3, 4, 5], square.dimension):
    print(f"N={row['N']}:  energy {row['energy']:.5f}   per level {row['energy_per_level']:.5f}")

G, _, residuals = gram_matrix(structure_from_cantor(square, 5, square.dimension))
d = np.diag(G)
print("\nGram matrix of the layers, normalised by the diagonal:")
print(np.array2string(G / np.sqrt(np.outer(d, d)), precision=4, suppress_small=True))
print(f"largest cancellation residual over all children: {residuals.max():.2e}")
