"""Dyadic nets over a point set and the Whitney-type cell complex built on them."""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .metric import DataError, PointSet

# neighbour radius of the gauge's argmin term, in units of 2^n
GAUGE_NEIGHBOUR = 18.0
# the gauge vanishes once dist(y, x_i) >= GAUGE_REACH * 2^n
GAUGE_REACH = 6.0


class RangeError(DataError):
    """A query needs dyadic scales that the complex does not hold."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


@dataclass(frozen=True)
class Net:
    scale: int
    center_indices: np.ndarray

    @property
    def radius(self) -> float:
        return 2.0 ** self.scale

    def to_dict(self):
        return {"scale": self.scale, "center_indices": [int(i) for i in self.center_indices]}


def greedy_net(X: PointSet, r: float) -> np.ndarray:
    """Indices of a maximal family of pairwise disjoint open r-balls centered in X.

    Points are scanned in index order and accepted when they lie at distance
    >= 2r from every accepted center. Buckets of side 2r limit the comparisons
    to adjacent buckets, which is valid for every p-norm since
    ``||v||_p >= ||v||_inf``.
    """
    if r <= 0:
        raise ValueError("net radius must be positive")
    pts = X.points
    side = 2.0 * r
    keys = np.floor(pts / side).astype(np.int64)
    offsets = np.array(np.meshgrid(*[[-1, 0, 1]] * X.d, indexing="ij")).reshape(X.d, -1).T
    buckets: dict[tuple, list[int]] = defaultdict(list)
    accepted = []
    norm = X.space.norm
    for i in range(len(X)):
        near = []
        for off in offsets:
            near.extend(buckets.get(tuple(keys[i] + off), ()))
        if near and np.any(norm(pts[near] - pts[i]) < side):
            continue
        accepted.append(i)
        buckets[tuple(keys[i])].append(i)
    return np.asarray(accepted, dtype=int)


def net_at_scale(X: PointSet, n: int) -> Net:
    return Net(n, greedy_net(X, 2.0 ** n))


@dataclass(frozen=True)
class ScaleRange:
    n_min: int | None
    n_max: int | None
    excluded: tuple = ()

    @property
    def empty(self) -> bool:
        return self.n_min is None


def scale_range(X: PointSet, queries) -> ScaleRange:
    """Dyadic scales needed to evaluate both partitions at ``queries``.

    Queries lying on X are excluded (their projection is a Dirac mass) and
    reported in ``excluded``. The lower end leaves room for the C^1 window,
    whose weights reach down to 2^n ~ dist(y, X) / 24.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[0] == 0:
        raise DataError("no queries")
    dd, _ = X.tree.query(queries, k=1, p=X.space.p)
    excluded = tuple(int(k) for k in np.flatnonzero(dd == 0))
    dd = dd[dd > 0]
    if dd.size == 0:
        return ScaleRange(None, None, excluded)
    n_min = math.floor(math.log2(dd.min())) - 5
    n_max = math.ceil(math.log2(dd.max())) + 2
    return ScaleRange(n_min, n_max, excluded)


def data_scale_range(X: PointSet, queries=None, headroom: int = 3) -> ScaleRange:
    """Scales fixed by the data: up to 2^headroom times the diameter of X.

    The coarse end depends on X only, so a query farther than about
    2.5 * 2^n_max from X is out of range. The fine end follows the queries
    when given (levels below the point separation are cheap), otherwise the
    separation itself.
    """
    if len(X) < 2:
        return ScaleRange(None, None)
    span = X.points.max(axis=0) - X.points.min(axis=0)
    diam = float(X.space.norm(span))
    dd, _ = X.tree.query(X.points, k=2, p=X.space.p)
    n_min = math.floor(math.log2(float(dd[:, 1].min()))) - 5
    n_max = math.ceil(math.log2(diam)) + headroom
    if queries is not None:
        q = scale_range(X, queries)
        if not q.empty:
            n_min = min(n_min, q.n_min)
    return ScaleRange(n_min, n_max)


def lip_scales(dist_yx: float) -> list[int]:
    """Scales n whose gauges can be positive: 2^(n-1) < dist < 2.5 * 2^n."""
    base = math.floor(math.log2(dist_yx))
    return [n for n in range(base - 3, base + 3)
            if 2.0 ** (n - 1) < dist_yx < 2.5 * 2.0 ** n]


def c1_scales(dist_yx: float, ell=3.0, delta=0.5) -> list[int]:
    """Scales n allowed by (ell - 2 - delta) 2^n <= dist <= 8 ell 2^n."""
    base = math.floor(math.log2(dist_yx))
    lo, hi = ell - 2.0 - delta, 8.0 * ell
    return [n for n in range(base - 7, base + 3)
            if lo * 2.0 ** n <= dist_yx <= hi * 2.0 ** n]


class ScaleLevel:
    """Net centers at one scale with a search tree over their coordinates."""

    def __init__(self, X: PointSet, net: Net, tree: cKDTree | None = None):
        self.net = net
        self.n = net.scale
        self.h = 2.0 ** net.scale
        self.centers = net.center_indices
        self.coords = X.points[self.centers]
        self.tree = tree if tree is not None else cKDTree(self.coords)
        self.p = X.space.p

    def nearest(self, y):
        dd, k = self.tree.query(y, k=1, p=self.p)
        return dd, int(k)

    def ball(self, y, radius) -> np.ndarray:
        """Positions (into ``centers``) within ``radius`` of y, sorted."""
        idx = self.tree.query_ball_point(y, radius, p=self.p)
        return np.sort(np.asarray(idx, dtype=int))


@dataclass(frozen=True)
class WhitneyCell:
    scale: int
    center_index: int
    neighbours: np.ndarray

    @property
    def key(self):
        return (self.scale, self.center_index)


@dataclass(frozen=True)
class CellHits:
    """Cells with positive gauge at a query; ``on_set`` marks y in X."""

    scales: np.ndarray
    centers: np.ndarray
    gauges: np.ndarray
    dist: float
    on_set: bool = False

    def __len__(self):
        return self.gauges.size

    def __iter__(self):
        return iter(zip(self.scales.tolist(), self.centers.tolist(), self.gauges.tolist()))


class CellComplex:
    """Greedy nets for every n in [n_min, n_max] over a fixed point set."""

    def __init__(self, X: PointSet, n_min: int, n_max: int):
        if n_min > n_max:
            raise DataError("empty scale range")
        self.X = X
        self.n_min = int(n_min)
        self.n_max = int(n_max)
        if len(X) > 1:
            dd, _ = X.tree.query(X.points, k=2, p=X.space.p)
            self._sep = float(dd[:, 1].min())
        else:
            self._sep = math.inf
        self.levels: dict[int, ScaleLevel] = {}
        all_idx = np.arange(len(X))
        for n in range(self.n_min, self.n_max + 1):
            if 2.0 * 2.0 ** n <= self._sep:
                # every point is a center; share the point set's tree
                self.levels[n] = ScaleLevel(X, Net(n, all_idx), X.tree)
            else:
                self.levels[n] = ScaleLevel(X, net_at_scale(X, n))

    @classmethod
    def for_queries(cls, X: PointSet, queries) -> "CellComplex":
        rng_ = scale_range(X, queries)
        if rng_.empty:
            raise RangeError("all queries lie on X; no scales needed")
        return cls(X, rng_.n_min, rng_.n_max)

    @property
    def scales(self):
        return range(self.n_min, self.n_max + 1)

    def net(self, n: int) -> Net:
        return self.levels[n].net

    def require(self, scales: list[int], dist_yx: float):
        missing = [n for n in scales if n not in self.levels]
        if missing or not scales:
            raise RangeError(
                f"dist(y, X) = {dist_yx:.6g} needs scales {scales}, complex holds "
                f"[{self.n_min}, {self.n_max}]")

    def cell(self, n: int, center_index: int) -> WhitneyCell:
        level = self.levels[n]
        pos = np.flatnonzero(level.centers == center_index)
        if pos.size == 0:
            raise KeyError(f"point {center_index} is not a center at scale {n}")
        x = self.X.points[center_index]
        nb = level.ball(x, GAUGE_NEIGHBOUR * level.h)
        nb = level.centers[nb]
        return WhitneyCell(n, int(center_index), nb[nb != center_index])

    def to_json(self) -> str:
        return json.dumps([self.net(n).to_dict() for n in self.scales])


def cell_gauge(y, cell: WhitneyCell, X: PointSet) -> float:
    """The 1-Lipschitz gauge of a single cell, from its stored neighbour list.

    g = max(0, min(h/2, D - h/2, 5h/2 - D, 6h - d_i,
                   h/2 + min_j (d_j - d_i) / 2))
    with h = 2^n, D = dist(y, X), d_k = dist(y, x_k) and j over the neighbours.
    """
    y = np.asarray(y, dtype=float)
    h = 2.0 ** cell.scale
    D, _ = X.tree.query(y, k=1, p=X.space.p)
    norm = X.space.norm
    d_i = norm(X.points[cell.center_index] - y)
    terms = [h / 2, D - h / 2, 2.5 * h - D, GAUGE_REACH * h - d_i]
    if cell.neighbours.size:
        d_j = norm(X.points[cell.neighbours] - y)
        terms.append(h / 2 + 0.5 * float(np.min(d_j - d_i)))
    return max(0.0, float(min(terms)))


def locate_cells(y, complex_: CellComplex) -> CellHits:
    """All cells whose gauge is positive at y, with the gauge values.

    Only centers with d_i < min(6h, d_* + h) can carry a positive gauge, where
    d_* is the nearest-center distance at that scale; every center that can
    lower the argmin term lies in the same ball and is a neighbour.
    """
    X = complex_.X
    y = np.asarray(y, dtype=float).ravel()
    D, _ = X.tree.query(y, k=1, p=X.space.p)
    D = float(D)
    if D == 0.0:
        return CellHits(np.empty(0, int), np.empty(0, int), np.empty(0), 0.0, on_set=True)
    scales = lip_scales(D)
    complex_.require(scales, D)
    out_n, out_i, out_g = [], [], []
    norm = X.space.norm
    for n in scales:
        level = complex_.levels[n]
        h = level.h
        d_star, _ = level.nearest(y)
        pos = level.ball(y, min(GAUGE_REACH * h, d_star + h))
        if pos.size == 0:
            continue
        d = norm(level.coords[pos] - y)
        order = np.argsort(d, kind="stable")
        first = d[order[0]]
        second = d[order[1]] if d.size > 1 else math.inf
        other_min = np.where(np.arange(d.size) == order[0], second, first)
        g = np.minimum.reduce([
            np.full(d.size, h / 2), np.full(d.size, D - h / 2), np.full(d.size, 2.5 * h - D),
            GAUGE_REACH * h - d, h / 2 + 0.5 * (other_min - d)])
        keep = g > 0
        out_n.extend([n] * int(keep.sum()))
        out_i.extend(level.centers[pos[keep]].tolist())
        out_g.extend(g[keep].tolist())
    return CellHits(np.asarray(out_n, int), np.asarray(out_i, int), np.asarray(out_g), D)


def ball_lists(tree: cKDTree, Y: np.ndarray, radii: np.ndarray, p: float):
    """Flattened ball queries: (row, position) pairs sorted by row, then position."""
    lists = tree.query_ball_point(Y, radii, p=p, return_sorted=True)
    lengths = np.fromiter((len(a) for a in lists), dtype=np.int64, count=len(lists))
    total = int(lengths.sum())
    pos = np.fromiter(itertools.chain.from_iterable(lists), dtype=np.int64, count=total)
    return np.repeat(np.arange(len(lists)), lengths), pos


def batch_dist(X: PointSet, Y: np.ndarray) -> np.ndarray:
    dd, _ = X.tree.query(Y, k=1, p=X.space.p)
    return np.asarray(dd, dtype=float)


def _require_batch(complex_: CellComplex, D: np.ndarray, needed: dict) -> None:
    bad = [r for r, ns in needed.items() if not ns or any(n not in complex_.levels for n in ns)]
    if bad:
        r = bad[0]
        raise RangeError(
            f"query row {r} (dist {D[r]:.6g}) needs scales {needed[r]}, complex holds "
            f"[{complex_.n_min}, {complex_.n_max}]", rows=bad)


@dataclass(frozen=True)
class BatchHits:
    """Positive gauges for many queries, sorted by (query, scale, center position)."""

    query: np.ndarray
    scales: np.ndarray
    centers: np.ndarray
    gauges: np.ndarray
    dist: np.ndarray

    @property
    def on_set(self) -> np.ndarray:
        return self.dist == 0.0


def locate_cells_batch(Y, complex_: CellComplex) -> BatchHits:
    """Vectorized :func:`locate_cells` over the rows of ``Y``."""
    X = complex_.X
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    D = batch_dist(X, Y)
    off = np.flatnonzero(D > 0)
    needed = {int(r): lip_scales(float(D[r])) for r in off}
    _require_batch(complex_, D, needed)
    h_all = {n: 2.0 ** n for ns in needed.values() for n in ns}
    parts = []
    norm = X.space.norm
    for n in sorted(h_all):
        h = h_all[n]
        rows = off[(2.0 ** (n - 1) < D[off]) & (D[off] < 2.5 * h)]
        if rows.size == 0:
            continue
        level = complex_.levels[n]
        Yr = Y[rows]
        if level.centers.size > 1:
            dd, kk = level.tree.query(Yr, k=2, p=level.p)
            d1, d2, k1 = dd[:, 0], dd[:, 1], kk[:, 0]
        else:
            d1, k1 = level.tree.query(Yr, k=1, p=level.p)
            d2 = np.full(rows.size, math.inf)
        rid, pos = ball_lists(level.tree, Yr, np.minimum(GAUGE_REACH * h, d1 + h), level.p)
        if pos.size == 0:
            continue
        d = norm(level.coords[pos] - Yr[rid])
        other = np.where(pos == k1[rid], d2[rid], d1[rid])
        Dr = D[rows][rid]
        g = np.minimum.reduce([np.full(d.size, h / 2), Dr - h / 2, 2.5 * h - Dr,
                               GAUGE_REACH * h - d, h / 2 + 0.5 * (other - d)])
        keep = g > 0
        parts.append((rows[rid[keep]], np.full(int(keep.sum()), n), pos[keep],
                      level.centers[pos[keep]], g[keep]))
    if not parts:
        e = np.empty(0, int)
        return BatchHits(e, e, e, np.empty(0), D)
    q, s, p_, c, g = (np.concatenate(a) for a in zip(*parts))
    order = np.lexsort((p_, s, q))
    return BatchHits(q[order], s[order], c[order], g[order], D)
