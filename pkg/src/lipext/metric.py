"""Ambient p-normed geometry, finite point sets, and doubling/capacity estimates.

All balls are open. Doubling and capacity are computed with centers restricted
to the point set, i.e. for X viewed as a metric space in its own right.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree


class DataError(ValueError):
    """Input data violates a precondition (shape, emptiness, range)."""


@dataclass(frozen=True)
class AmbientSpace:
    dimension: int
    p: float = 2.0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise DataError(f"dimension must be a positive integer, got {self.dimension}")
        if not (1.0 < self.p < math.inf):
            raise DataError(f"norm exponent must lie in (1, inf), got {self.p}")

    @property
    def q(self) -> float:
        """Dual exponent, used for operator norms of covectors."""
        return self.p / (self.p - 1.0)

    def norm(self, v, axis=-1):
        v = np.asarray(v, dtype=float)
        if self.p == 2.0:
            return np.sqrt(np.sum(v * v, axis=axis))
        return np.sum(np.abs(v) ** self.p, axis=axis) ** (1.0 / self.p)

    def dual_norm(self, c, axis=-1):
        c = np.asarray(c, dtype=float)
        if self.p == 2.0:
            return np.sqrt(np.sum(c * c, axis=axis))
        return np.sum(np.abs(c) ** self.q, axis=axis) ** (1.0 / self.q)

    def norm_gradient(self, v):
        """Gradient of ``||v||_p`` for rows of ``v``; undefined at the origin."""
        v = np.atleast_2d(np.asarray(v, dtype=float))
        r = self.norm(v)[:, None]
        if np.any(r == 0.0):
            raise ValueError("p-norm is not differentiable at the origin")
        if self.p == 2.0:
            return v / r
        return np.sign(v) * (np.abs(v) / r) ** (self.p - 1.0)


def dist(a, b, space: AmbientSpace | None = None) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DataError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    space = space or AmbientSpace(a.shape[0])
    if space.dimension != a.shape[0]:
        raise DataError(f"dimension mismatch: space has d={space.dimension}, got {a.shape[0]}")
    return float(space.norm(a - b))


@dataclass(frozen=True, eq=False)
class PointSet:
    """A finite subset of a p-normed space, with optional positive weights."""

    points: np.ndarray
    space: AmbientSpace = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DataError("point set must be a nonempty (N, d) array")
        if not np.all(np.isfinite(pts)):
            raise DataError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.space is None:
            object.__setattr__(self, "space", AmbientSpace(pts.shape[1]))
        elif self.space.dimension != pts.shape[1]:
            raise DataError(f"points have d={pts.shape[1]}, space has d={self.space.dimension}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape[0] != pts.shape[0]:
                raise DataError("one weight per point required")
            if not np.all(w > 0):
                raise DataError("weights must be strictly positive")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        if pts.shape[0] > 1 and self.tree.query_pairs(0.0):
            raise DataError("points must be pairwise distinct")

    def __len__(self):
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.space.dimension

    @property
    def measure(self) -> np.ndarray:
        """The weights, defaulting to counting measure."""
        return self.weights if self.weights is not None else np.ones(len(self))

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points)

    def scaled(self, factor: float) -> "PointSet":
        return PointSet(self.points * factor, self.space, self.weights)

    def pairwise(self) -> np.ndarray:
        diff = self.points[:, None, :] - self.points[None, :, :]
        return self.space.norm(diff)

    def query(self, y):
        """(distance, index) of the nearest point, lowest index on ties."""
        return dist_to_set(y, self)


def dist_to_set(y, X: PointSet):
    """Exact distance from ``y`` to X and the lowest-index nearest point."""
    if len(X) == 0:
        raise DataError("empty point set")
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.d:
        raise DataError(f"dimension mismatch: query has d={y.shape[0]}, X has d={X.d}")
    dd, _ = X.tree.query(y, k=1, p=X.space.p)
    # the tree may disagree with the direct norm in the last ulp; resolve exactly
    near = X.tree.query_ball_point(y, dd * (1 + 1e-9) + 1e-300, p=X.space.p)
    near = np.sort(np.asarray(near, dtype=int))
    dn = X.space.norm(X.points[near] - y)
    k = int(np.argmin(dn))
    return float(dn[k]), int(near[k])


def critical_radii(X: PointSet) -> np.ndarray:
    """Radii meeting every combinatorial type of (B(x, 2r), r-cover) pair.

    Ball memberships change only at r = d or r = d/2 for pairwise distances d;
    with open balls both the critical values and the open gaps between them
    must be visited, so their midpoints (and one radius past each end) are
    included.
    """
    D = X.pairwise()
    iu = np.triu_indices(len(X), 1)
    ds = D[iu]
    crit = np.unique(np.concatenate([ds, ds / 2.0]))
    mids = (crit[:-1] + crit[1:]) / 2.0
    return np.unique(np.concatenate([[crit[0] / 2.0], crit, mids, [crit[-1] * 2.0]]))


@dataclass(frozen=True)
class DoublingEstimate:
    lambda_hat: int
    sampled_pairs: list = field(default_factory=list)
    exact: bool = False

    def to_dict(self):
        return {
            "lambda_hat": self.lambda_hat,
            "exact": self.exact,
            "sampled_pairs": [[int(i), float(r)] for i, r in self.sampled_pairs],
        }


def _greedy_cover(cover: np.ndarray) -> int:
    """Greedy set cover; ``cover[c, p]`` says candidate c covers target p."""
    uncovered = np.ones(cover.shape[1], dtype=bool)
    count = 0
    while uncovered.any():
        gain = cover[:, uncovered].sum(axis=1)
        c = int(np.argmax(gain))
        uncovered &= ~cover[c]
        count += 1
    return count


def _min_cover(cover: np.ndarray) -> int:
    """Exact minimum set cover by enumeration of subsets in increasing size."""
    n_targets = cover.shape[1]
    masks = {sum(1 << int(k) for k in np.flatnonzero(row)) for row in cover}
    masks = sorted((m for m in masks if m), reverse=True)
    full = (1 << n_targets) - 1
    for size in range(1, n_targets + 1):
        for combo in itertools.combinations(masks, size):
            acc = 0
            for m in combo:
                acc |= m
            if acc == full:
                return size
    return n_targets


def estimate_doubling(X: PointSet, radius_grid=None, centers=None, exact=False,
                      max_ball=None) -> DoublingEstimate:
    """Cover B(x, 2r) ∩ X by r-balls centered in X, maximized over (x, r).

    With ``exact=False`` covers are greedy, so the result is an upper bound of
    the X-centered doubling constant. ``exact=True`` solves each cover exactly
    and is only feasible for small balls. ``max_ball`` skips (x, r) pairs whose
    2r-ball holds more points than that; skipped pairs are not recorded.
    """
    n = len(X)
    if n == 1:
        return DoublingEstimate(1, [(0, 0.0)], exact=True)
    if radius_grid is None:
        radius_grid = critical_radii(X)
    radius_grid = np.asarray(radius_grid, dtype=float).ravel()
    if radius_grid.size == 0:
        raise DataError("radius grid must be nonempty")
    centers = range(n) if centers is None else centers
    p = X.space.p
    best = 1
    audited = []
    for i in centers:
        x = X.points[i]
        for r in radius_grid:
            if r <= 0:
                continue
            ball = _open_ball(X, x, 2 * r)
            if max_ball is not None and ball.size > max_ball:
                continue
            audited.append((int(i), float(r)))
            if ball.size <= best:
                continue
            cand = np.asarray(X.tree.query_ball_point(x, 3 * r, p=p), dtype=int)
            diff = X.points[cand][:, None, :] - X.points[ball][None, :, :]
            cover = X.space.norm(diff) < r
            count = _min_cover(cover) if exact else _greedy_cover(cover)
            best = max(best, count)
    return DoublingEstimate(int(best), audited, exact=exact)


def _open_ball(X: PointSet, center, radius) -> np.ndarray:
    idx = np.asarray(X.tree.query_ball_point(center, radius, p=X.space.p), dtype=int)
    if idx.size == 0:
        return idx
    dd = X.space.norm(X.points[idx] - center)
    return np.sort(idx[dd < radius])


def default_doubling(X: PointSet, max_exhaustive=64, n_centers=48, n_radii=24,
                     max_ball=400) -> DoublingEstimate:
    """Doubling estimate with a sampling budget suited to larger sets.

    Small sets use every center and the full critical radius grid; larger ones
    use evenly spaced centers and log-spaced radii from the critical set.
    """
    n = len(X)
    if n <= max_exhaustive:
        return estimate_doubling(X)
    centers = np.unique(np.linspace(0, n - 1, n_centers).round().astype(int))
    # nearest-neighbour spacing to a modest multiple of it covers the local regime
    dd, _ = X.tree.query(X.points, k=2, p=X.space.p)
    lo = float(np.min(dd[:, 1])) / 2
    span = float(np.max(X.points.max(0) - X.points.min(0))) * X.d
    radii = np.geomspace(lo, max(span, 2 * lo), n_radii)
    return estimate_doubling(X, radius_grid=radii, centers=centers, max_ball=max_ball)


@dataclass(frozen=True)
class CapacityEstimate:
    epsilon: float
    kappa_hat: int
    exact: bool = False
    witness: dict = field(default_factory=dict)

    def to_dict(self):
        return {"epsilon": self.epsilon, "kappa_hat": self.kappa_hat,
                "exact": self.exact, "witness": self.witness}


def _capacity_radii(D: np.ndarray, epsilon: float) -> np.ndarray:
    """One radius per cell of the arrangement cut by d and d/epsilon."""
    ds = np.unique(D[np.triu_indices(D.shape[0], 1)])
    crit = np.unique(np.concatenate([ds, ds / epsilon]))
    mids = (crit[:-1] + crit[1:]) / 2.0
    return np.concatenate([[crit[0] / 2.0], mids, [crit[-1] * 2.0]])


def _max_independent(adj: list[int], nodes: int) -> tuple[int, int]:
    """Maximum independent set on a bitmask graph; returns (size, mask)."""
    best = [0, 0]

    def rec(avail, chosen, size):
        if size + bin(avail).count("1") <= best[0]:
            return
        if avail == 0:
            best[0], best[1] = size, chosen
            return
        v = avail.bit_length() - 1
        rec(avail & ~(1 << v) & ~adj[v], chosen | (1 << v), size + 1)
        rec(avail & ~(1 << v), chosen, size)

    rec(nodes, 0, 0)
    return best[0], best[1]


def _greedy_packing(conflict: np.ndarray, order: np.ndarray) -> list[int]:
    chosen = []
    blocked = np.zeros(conflict.shape[0], dtype=bool)
    for c in order:
        if not blocked[c]:
            chosen.append(int(c))
            blocked |= conflict[c]
    # one round of 1-for-2 swaps
    improved = True
    while improved:
        improved = False
        for c in list(chosen):
            rest = [k for k in chosen if k != c]
            free = ~conflict[rest].any(axis=0) if rest else np.ones(conflict.shape[0], bool)
            free[rest] = False
            free_idx = np.flatnonzero(free)
            for a_pos, a in enumerate(free_idx):
                others = free_idx[a_pos + 1:]
                others = others[~conflict[a, others]]
                if others.size:
                    chosen = rest + [int(a), int(others[0])]
                    improved = True
                    break
            if improved:
                break
    return chosen


def _sampled_radii(X: PointSet, epsilon: float, count: int) -> np.ndarray:
    """Log-spaced radii from the scale where eps r-balls start to hold neighbours."""
    dd, _ = X.tree.query(X.points, k=2, p=X.space.p)
    lo = float(np.min(dd[:, 1]))
    span = float(np.max(X.points.max(0) - X.points.min(0))) * X.d
    return np.geomspace(lo / epsilon, max(span, 2 * lo / epsilon), count)


def _local_packing(X: PointSet, epsilon: float, x0: int, r: float):
    """Greedy packing inside B(x0, r), computed on the points near that ball only."""
    ball = _open_ball(X, X.points[x0], r)
    halo = _open_ball(X, X.points[x0], r * (1.0 + epsilon))
    Dl = X.space.norm(X.points[ball][:, None, :] - X.points[halo][None, :, :])
    member = Dl < epsilon * r
    inside = np.isin(halo, ball)
    ok = ~(member & ~inside[None, :]).any(axis=1)
    cand = ball[ok]
    M = member[ok].astype(np.int64)
    conflict = (M @ M.T) > 0
    np.fill_diagonal(conflict, False)
    d0 = X.space.norm(X.points[cand] - X.points[x0])
    order = np.argsort(d0, kind="stable")[::-1]
    return [int(cand[k]) for k in _greedy_packing(conflict, order)]


def estimate_capacity(X: PointSet, epsilon: float, exhaustive=False, max_exhaustive=8,
                      n_samples=64, seed=0, max_ball=400) -> CapacityEstimate:
    """Pack disjoint (epsilon r)-balls of X inside an r-ball of X.

    The returned value is witnessed by an explicit packing, so it is always a
    lower bound of the capacity. With ``exhaustive=True`` and
    ``len(X) <= max_exhaustive`` every center and every combinatorially
    distinct radius is examined and the packing is a maximum independent set,
    making the value exact. Otherwise (x0, r) pairs are sampled from
    log-spaced radii, balls holding more than ``max_ball`` points are skipped,
    and packings are greedy with a swap pass; ``exact`` is then False.
    """
    if not (0 < epsilon <= 1):
        raise DataError("epsilon must lie in (0, 1]")
    n = len(X)
    if n == 1:
        return CapacityEstimate(epsilon, 1, exact=True,
                                witness={"x0": 0, "r": 1.0, "centers": [0]})
    if not (exhaustive and n <= max_exhaustive):
        rng = np.random.default_rng(seed)
        radii = _sampled_radii(X, epsilon, 24)
        best = (1, {"x0": 0, "r": float(radii[0]), "centers": [0]})
        for _ in range(n_samples):
            x0, r = int(rng.integers(n)), float(rng.choice(radii))
            if _open_ball(X, X.points[x0], r).size > max_ball:
                continue
            chosen = _local_packing(X, epsilon, x0, r)
            if len(chosen) > best[0]:
                best = (len(chosen), {"x0": x0, "r": r, "centers": sorted(chosen)})
        return CapacityEstimate(epsilon, int(best[0]), exact=False, witness=best[1])
    D = X.pairwise()
    best = (0, None)
    for x0 in range(n):
        for r in _capacity_radii(D, epsilon):
            member = D < epsilon * r  # member[i, p]: p in B(x_i, eps r)
            inside = D[x0] < r
            cand = np.flatnonzero(~(member & ~inside[None, :]).any(axis=1))
            if cand.size <= best[0]:
                continue
            conflict = (member[cand].astype(np.int64) @ member[cand].T.astype(np.int64)) > 0
            np.fill_diagonal(conflict, False)
            adj = [int(sum(1 << k for k in np.flatnonzero(row))) for row in conflict]
            size, mask = _max_independent(adj, (1 << cand.size) - 1)
            if size > best[0]:
                chosen = [int(cand[k]) for k in range(cand.size) if mask >> k & 1]
                best = (size, {"x0": int(x0), "r": float(r), "centers": sorted(chosen)})
    return CapacityEstimate(epsilon, int(best[0]), exact=True, witness=best[1])


def check_packing(X: PointSet, epsilon: float, witness: dict) -> bool:
    """Verify that a capacity witness really is a disjoint packing."""
    D = X.pairwise()
    r = witness["r"]
    member = D[witness["centers"]] < epsilon * r
    inside = D[witness["x0"]] < r
    if (member & ~inside[None, :]).any():
        return False
    return bool((member.sum(axis=0) <= 1).all())


def dyadic_k(epsilon: float) -> int:
    """The k with 2^-k < epsilon <= 2^-(k-1)."""
    k = 1
    while epsilon <= 2.0 ** (-k):
        k += 1
    return k


def measure_doubling_ratio(X: PointSet, radius_grid=None) -> float:
    """max over x in X, r in grid of m(B(x, 2r)) / m(B(x, r))."""
    w = X.measure
    if len(X) == 1:
        return 1.0
    D = X.pairwise()
    radii = critical_radii(X) if radius_grid is None else np.asarray(radius_grid)
    best = 1.0
    for r in radii:
        inner = (D < r) @ w
        outer = (D < 2 * r) @ w
        best = max(best, float(np.max(outer / inner)))
    return best


@dataclass
class SlopeReport:
    value: float
    skipped: list = field(default_factory=list)


def slope_estimate(F, y, probe_radii, directions) -> SlopeReport:
    """max over probes of |F(y + h v) - F(y)| / h, a lower approximation of the slope.

    ``directions`` should have unit length in the ambient norm (see
    :func:`unit_directions`). Probes where F raises or returns non-finite
    values are skipped and listed in the report.
    """
    y = np.asarray(y, dtype=float)
    f0 = np.asarray(F(y), dtype=float)
    best = 0.0
    skipped = []
    for h in probe_radii:
        if h <= 0:
            raise ValueError("probe radii must be positive")
        for v in directions:
            v = np.asarray(v, dtype=float)
            try:
                f1 = np.asarray(F(y + h * v), dtype=float)
            except (ValueError, ArithmeticError) as exc:
                skipped.append((float(h), v.tolist(), str(exc)))
                continue
            if not np.all(np.isfinite(f1)):
                skipped.append((float(h), v.tolist(), "non-finite value"))
                continue
            best = max(best, float(np.max(np.abs(f1 - f0))) / h)
    return SlopeReport(best, skipped)


def unit_directions(d: int, count: int, rng, space: AmbientSpace | None = None) -> np.ndarray:
    """Random directions of unit length in the ambient norm."""
    v = rng.standard_normal((count, d))
    space = space or AmbientSpace(d)
    return v / space.norm(v)[:, None]
