"""Deterministic point-set families, query samplers and ground-truth test functions."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .covering import greedy_net
from .extension import Jet, ScalarField
from .metric import AmbientSpace, DataError, PointSet

FAMILIES = ("grid", "sphere-net", "cantor", "random-cloud")


@dataclass(frozen=True)
class SpaceSpec:
    """``size`` is n per axis for grids, the level for cantor, and a point count otherwise."""

    family: str
    dimension: int = 1
    size: int = 4
    seed: int = 0
    p: float = 2.0

    @property
    def label(self) -> str:
        if self.family == "cantor":
            return f"cantor-L{self.size}"
        return f"{self.family}-d{self.dimension}-n{self.size}"

    def to_dict(self):
        return asdict(self)


def _grid(d: int, n: int) -> np.ndarray:
    if n < 1:
        raise DataError("grid needs n >= 1")
    axis = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    mesh = np.meshgrid(*[axis] * d, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _cantor(level: int) -> np.ndarray:
    if level < 0:
        raise DataError("cantor level must be nonnegative")
    intervals = [(0.0, 1.0)]
    for _ in range(level):
        nxt = []
        for a, b in intervals:
            w = (b - a) / 3.0
            nxt.append((a, a + w))
            nxt.append((b - w, b))
        intervals = nxt
    pts = sorted({x for ab in intervals for x in ab})
    return np.asarray(pts)[:, None]


def _sphere_net(d: int, size: int, seed: int) -> np.ndarray:
    if d < 2:
        raise DataError("sphere-net needs d >= 2")
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((max(20 * size, 200), d))
    dense /= np.linalg.norm(dense, axis=1)[:, None]
    # net radius chosen so that roughly ``size`` disjoint caps fit on the sphere
    r = 0.5 * (4.0 * math.pi / size) ** (1.0 / (d - 1)) if d > 2 else math.pi / size
    keep = greedy_net(PointSet(dense), r)
    return dense[keep]


def generate_space(spec: SpaceSpec) -> PointSet:
    if spec.family not in FAMILIES:
        raise DataError(f"unknown family {spec.family!r}; choose from {FAMILIES}")
    if spec.dimension < 1 or spec.size < 1 and spec.family != "cantor":
        raise DataError("dimension and size must be positive")
    if spec.family == "grid":
        pts = _grid(spec.dimension, spec.size)
    elif spec.family == "cantor":
        if spec.dimension != 1:
            raise DataError("cantor sets live in R (dimension 1)")
        pts = _cantor(spec.size)
    elif spec.family == "sphere-net":
        pts = _sphere_net(spec.dimension, spec.size, spec.seed)
    else:
        pts = np.random.default_rng(spec.seed).random((spec.size, spec.dimension))
    return PointSet(pts, AmbientSpace(spec.dimension, spec.p))


def sample_queries(X: PointSet, count: int, seed: int = 0, inflate: float = 0.25) -> np.ndarray:
    """Uniform draws from the bounding box grown by ``inflate`` of its side, off X.

    Degenerate axes (a flat set) are given the largest side length instead.
    """
    rng = np.random.default_rng(seed)
    lo, hi = X.points.min(axis=0), X.points.max(axis=0)
    side = hi - lo
    full = float(side.max()) if side.max() > 0 else 1.0
    side = np.where(side > 0, side, full)
    mid = 0.5 * (lo + hi)
    half = 0.5 * side * (1.0 + 2.0 * inflate)
    out = np.empty((0, X.d))
    while out.shape[0] < count:
        ys = mid + half * rng.uniform(-1.0, 1.0, size=(count, X.d))
        dd, _ = X.tree.query(ys, k=1, p=X.space.p)
        out = np.vstack([out, ys[dd > 0]])
    return out[:count]


@dataclass(frozen=True)
class McShane:
    """f(y) = min_j (v_j + |y - q_j|); Lipschitz with constant 1 everywhere."""

    anchors: np.ndarray
    offsets: np.ndarray
    space: AmbientSpace

    def __call__(self, ys) -> np.ndarray:
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        d = self.space.norm(ys[:, None, :] - self.anchors[None, :, :])
        return np.min(self.offsets[None, :] + d, axis=1)


def mcshane_function(X: PointSet, anchors=4, seed: int = 0, offsets=None):
    """A unit-Lipschitz ScalarField on X together with its ambient formula.

    ``anchors`` is either a count (anchors drawn in the inflated bounding box)
    or an explicit (a, d) array.
    """
    rng = np.random.default_rng(seed)
    if np.isscalar(anchors):
        if int(anchors) < 1:
            raise DataError("at least one anchor is required")
        q = sample_queries(X, int(anchors), seed=seed + 7919)
    else:
        q = np.atleast_2d(np.asarray(anchors, dtype=float))
        if q.shape[0] < 1 or q.shape[1] != X.d:
            raise DataError("anchors must be a nonempty (a, d) array")
    v = rng.uniform(0.0, 0.5, size=q.shape[0]) if offsets is None else np.asarray(offsets, float)
    F = McShane(q, v, X.space)
    return ScalarField(F(X.points)), F


def square_jet(X: PointSet, center=None) -> Jet:
    """Jet of y -> |y - c|_2^2 (values |x - c|^2, differentials 2(x - c)); c = 0 by default."""
    P = X.points if center is None else X.points - np.asarray(center, float)
    return Jet(np.sum(P * P, axis=1), 2.0 * P[:, None, :])


def affine_jet(X: PointSet, A, b) -> Jet:
    A = np.atleast_2d(np.asarray(A, float))
    b = np.atleast_1d(np.asarray(b, float))
    vals = X.points @ A.T + b
    return Jet(vals, np.broadcast_to(A, (len(X),) + A.shape).copy())


def smooth_jet(X: PointSet) -> Jet:
    """Jet of sum_i (sin(3 x_i) + 4 x_i); each partial derivative lies in [1, 7]."""
    P = X.points
    return Jet(np.sum(np.sin(3 * P) + 4 * P, axis=1), (3 * np.cos(3 * P) + 4)[:, None, :])


def random_jet(X: PointSet, seed: int = 0, k: int = 1) -> Jet:
    """Values and differentials with no compatibility between them."""
    rng = np.random.default_rng(seed)
    return Jet(rng.standard_normal((len(X), k)), rng.standard_normal((len(X), k, X.d)))


def parse_label(label: str, seed: int = 0, p: float = 2.0) -> SpaceSpec:
    """Inverse of ``SpaceSpec.label``: "grid-d2-n8", "cantor-L3", "random-cloud-d3-n50"."""
    import re

    m = re.fullmatch(r"cantor-L(\d+)", label)
    if m:
        return SpaceSpec("cantor", 1, int(m.group(1)), seed, p)
    m = re.fullmatch(r"(grid|sphere-net|random-cloud)-d(\d+)-n(\d+)", label)
    if not m:
        raise DataError(f"cannot parse instance label {label!r}")
    return SpaceSpec(m.group(1), int(m.group(2)), int(m.group(3)), seed, p)
