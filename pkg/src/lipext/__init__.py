"""Linear Lipschitz and C^1 extension from finite doubling point sets."""

from .metric import AmbientSpace, DataError, PointSet, dist, dist_to_set
from .covering import CellComplex, RangeError
from .partitions import C1Partition, LipPartition
from .projection import (CellProjection, DiscreteMeasure, KernelProjection,
                         RegularProjection, VectorMeasure)
from .extension import Jet, ScalarField, differential_c1, extend_c1, extend_lip
from .wasserstein import w1_exact

__all__ = [
    "AmbientSpace", "DataError", "PointSet", "dist", "dist_to_set", "CellComplex",
    "RangeError", "C1Partition", "LipPartition", "CellProjection", "DiscreteMeasure",
    "KernelProjection", "RegularProjection", "VectorMeasure", "Jet", "ScalarField",
    "differential_c1", "extend_c1", "extend_lip", "w1_exact",
]
