"""What a random projection looks like, and how fast it moves.

Each ambient point y is sent to a probability measure on the data set. On the
data it is a Dirac mass; off the data it spreads over nearby points. The
script prints a few of these measures along a segment and measures how much
they move in Wasserstein-1 distance per unit step of y.
"""

import numpy as np

from lipext.covering import CellComplex
from lipext.partitions import LipPartition
from lipext.projection import CellProjection, KernelProjection
from lipext.spaces import SpaceSpec, generate_space
from lipext.wasserstein import w1_exact

X = generate_space(SpaceSpec("cantor", 1, 3))
path = np.linspace(-0.1, 1.1, 241)[:, None]
cells = CellProjection(LipPartition(CellComplex.for_queries(X, path)))
kernel = KernelProjection(X)

for y in (0.0, 0.15, 0.5):
    mu = kernel(np.array([y]))
    atoms = ", ".join(f"{X.points[i, 0]:.4f}:{w:.3f}" for i, w in zip(mu.support, mu.weights))
    print(f"kernel mu at y = {y:4.2f} -> {atoms}")

for proj in (cells, kernel):
    steps = [w1_exact(proj(a), proj(b), X)[0] / abs(b[0] - a[0])
             for a, b in zip(path[:-1], path[1:])]
    print(f"{proj.name:6s}: max W1(mu_y, mu_y') / |y - y'| along the path = {max(steps):.3f}")
