"""Shared hypothesis strategies."""

import numpy as np
from hypothesis import strategies as st


def point_arrays(n: int, d: int, resolution: int = 64):
    """n distinct points of the lattice (1/resolution) Z^d in [0, 1]^d."""
    cells = st.lists(st.tuples(*[st.integers(0, resolution)] * d), min_size=n, max_size=n,
                     unique=True)
    return cells.map(lambda rows: np.asarray(rows, dtype=float) / resolution)
