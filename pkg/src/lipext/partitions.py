"""Lipschitz and C^1 partitions of unity on the complement of a point set."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covering import (CellComplex, RangeError, _require_batch, ball_lists, batch_dist,
                       c1_scales, locate_cells, locate_cells_batch)
from .metric import PointSet, default_doubling

M_FLOOR = 1.01


class XiError(ValueError):
    """The cutoff failed its differential inequality on the check grid."""


@dataclass(frozen=True)
class CutoffXi:
    """Increasing C^1 cutoff with xi = 0 on t <= 0, xi = 1 on t >= delta.

    On [0, t1] it follows (2t/delta)^m, which solves xi' = f(xi) with
    f(t) = (2m/delta) t^(1 - 1/m) and reaches 1/2 at t1. A quadratic cap then
    decelerates from slope f(1/2) to 0 over a span of length 1/f(1/2), on which
    xi' <= f(1/2) <= f(xi). The cap ends at or before delta for every m > 1.
    """

    m: float
    delta: float
    t1: float
    cap: float
    slope: float  # f(1/2)

    def f(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return (2.0 * self.m / self.delta) * t ** (1.0 - 1.0 / self.m)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = t - self.t1
        lower = (2.0 * np.clip(t, 0.0, self.t1) / self.delta) ** self.m
        upper = np.minimum(0.5 + self.slope * s - self.slope * s * s / (2.0 * self.cap), 1.0)
        out = np.where(t <= self.t1, lower, upper)
        out = np.where(t <= 0.0, 0.0, out)
        return np.where(s >= self.cap, 1.0, out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        s = t - self.t1
        lower = (2.0 * self.m / self.delta) * (2.0 * np.clip(t, 0.0, self.t1) / self.delta) ** (self.m - 1.0)
        upper = self.slope * (1.0 - s / self.cap)
        out = np.where(t <= self.t1, lower, upper)
        # where xi underflows to 0 its derivative is below 1e-300 as well
        out = np.where((t <= 0.0) | (self(t) == 0.0), 0.0, out)
        return np.where(s >= self.cap, 0.0, out)

    @property
    def support_end(self) -> float:
        return self.t1 + self.cap

    def check(self, points=10_000, rtol=1e-12):
        """Grid check of the cutoff's defining properties; returns max(xi' - f(xi))."""
        t = np.linspace(-0.25 * self.delta, 1.25 * self.delta, points)
        t = np.sort(np.concatenate([t, [0.0, getattr(self, "t1", 0.0), self.support_end, self.delta]]))
        x = self(t)
        dx = self.derivative(t)
        excess = dx - self.f(x) * (1.0 + rtol)
        if np.any(excess > 0):
            k = int(np.argmax(excess))
            raise XiError(f"xi' > f(xi) at t={t[k]:.6g} (m={self.m}, delta={self.delta})")
        if np.any(x < 0) or np.any(x > 1) or np.any(np.diff(x) < -1e-15):
            raise XiError(f"xi not a monotone map into [0, 1] (m={self.m}, delta={self.delta})")
        if self(self.delta) != 1.0 or self(0.0) != 0.0:
            raise XiError("xi misses its anchor values")
        return float(np.max(dx - self.f(x)))


@dataclass(frozen=True)
class PowerXi:
    """xi(t) = sigma(t)^m with sigma(t) = 1 - (1 - t/delta)^2 on [0, delta].

    Since sigma' <= 2/delta, xi' = m sigma^(m-1) sigma' <= f(xi) holds exactly.
    The rise from 0.01 to 0.99 spans about 0.4 delta for every m, which keeps
    second derivatives of the partition moderate.
    """

    m: float
    delta: float

    def f(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return (2.0 * self.m / self.delta) * t ** (1.0 - 1.0 / self.m)

    def _sigma(self, t):
        u = np.clip(np.asarray(t, dtype=float) / self.delta, 0.0, 1.0)
        return 1.0 - (1.0 - u) ** 2, u

    def __call__(self, t):
        s, _ = self._sigma(t)
        return s ** self.m

    def derivative(self, t):
        s, u = self._sigma(t)
        d = self.m * s ** (self.m - 1.0) * (2.0 / self.delta) * (1.0 - u)
        return np.where(s ** self.m == 0.0, 0.0, d)

    @property
    def support_end(self) -> float:
        return self.delta

    check = CutoffXi.check


XI_PROFILES = ("power", "branch")


def build_xi(m: float, delta: float = 0.5, check_points=10_000, profile: str = "power"):
    """A C^1 cutoff with xi' <= f(xi), grid-checked before it is returned.

    ``profile="branch"`` follows the equality solution up to xi = 1/2 and caps
    it with a quadratic; ``"power"`` is the smoother default.
    """
    if not m > 1.0:
        raise XiError(f"m must exceed 1 for xi to be C^1 at 0, got {m}")
    if not delta > 0:
        raise XiError("delta must be positive")
    if profile == "power":
        xi = PowerXi(m, delta)
    elif profile == "branch":
        t1 = 0.5 * delta * 0.5 ** (1.0 / m)
        slope = (2.0 * m / delta) * 0.5 ** (1.0 - 1.0 / m)
        cap = 1.0 / slope
        xi = CutoffXi(m, delta, t1, cap, slope)
        if xi.support_end > delta:
            raise XiError(f"cap overruns delta for m={m}, delta={delta}")
    else:
        raise XiError(f"unknown xi profile {profile!r}")
    xi.check(check_points)
    return xi


@dataclass(frozen=True)
class Weights:
    """Sparse partition values at one query; ``grads`` only for C^1 partitions."""

    scales: np.ndarray
    centers: np.ndarray
    weights: np.ndarray
    dist: float
    grads: np.ndarray | None = None
    raw: np.ndarray | None = None
    on_set: bool = False

    def __len__(self):
        return self.weights.size

    def keys(self):
        return list(zip(self.scales.tolist(), self.centers.tolist()))

    def as_dict(self):
        return dict(zip(self.keys(), self.weights.tolist()))


def _lambda_hat(X: PointSet) -> int:
    return default_doubling(X).lambda_hat


class LipPartition:
    """phi_i^n = g_i^n(y)^m / sum of g^m over all cells, g the cell gauges."""

    def __init__(self, complex_: CellComplex, m: float | None = None, lambda_hat: int | None = None):
        self.complex = complex_
        self.X = complex_.X
        if m is None:
            lam = lambda_hat if lambda_hat is not None else _lambda_hat(self.X)
            m = max(math.log2(lam), M_FLOOR)
        self.m = float(m)

    def __call__(self, y) -> Weights:
        return eval_lip_partition(self, y)


def eval_lip_partition(P: LipPartition, y) -> Weights:
    hits = locate_cells(y, P.complex)
    if hits.on_set:
        return Weights(hits.scales, hits.centers, np.empty(0), 0.0, on_set=True)
    if len(hits) == 0:
        raise RangeError(f"no cell covers the query at dist {hits.dist:.6g}")
    # scale by the largest gauge so that g^m cannot underflow
    g = hits.gauges / hits.gauges.max()
    raw = g ** P.m
    return Weights(hits.scales, hits.centers, raw / raw.sum(), hits.dist)


class C1Partition:
    """C^1 partition built from three-factor products of the cutoff xi.

    raw_i^n(y) = xi(8l - d_i/h) xi(d_i/h - l) prod_{j ~ i} xi((d_j - d_i)/h + delta)
    with h = 2^n, d_k = |y - x_k^n| and j ~ i when |x_j - x_i| <= (9l - delta) h.
    """

    def __init__(self, complex_: CellComplex, ell: float = 3.0, delta: float = 0.5,
                 m: float | None = None, lambda_hat: int | None = None,
                 xi_profile: str = "power"):
        self.complex = complex_
        self.X = complex_.X
        self.ell = float(ell)
        self.delta = float(delta)
        if m is None:
            lam = lambda_hat if lambda_hat is not None else _lambda_hat(self.X)
            m = math.log(4.0 * lam ** 6)
        self.m = float(m)
        self.xi = build_xi(self.m, self.delta, profile=xi_profile)
        self.neighbour_radius = 9.0 * self.ell - self.delta

    def __call__(self, y) -> Weights:
        return eval_c1_partition(self, y)


def _c1_level(P: C1Partition, level, y, D):
    """Raw weights and their gradients for the centers of one scale."""
    X = P.X
    space = X.space
    h = level.h
    ell, delta, xi = P.ell, P.delta, P.xi
    d_star, k_star = level.nearest(y)
    far = 8.0 * ell * h
    if d_star >= far:
        return None
    # survivors outside the shell d_i < d_* + delta h need x_* to be a non-neighbour,
    # forcing d_i > (9l - delta) h - d_*, impossible below 8l h when d_* <= (l - delta) h
    radius = far if d_star > (ell - delta) * h else min(far, d_star + delta * h)
    pos = level.ball(y, radius)
    coords = level.coords[pos]
    d = space.norm(coords - y)
    live = (d > ell * h) & (d < far)
    if not live.any():
        return None
    star = int(np.argmin(d))
    near_star = space.norm(coords - coords[star]) <= P.neighbour_radius * h
    live &= ~(near_star & (d >= d[star] + delta * h))
    idx = np.flatnonzero(live)
    if idx.size == 0:
        return None
    grad_cache = {}

    def ngrad(k):
        if k not in grad_cache:
            grad_cache[k] = space.norm_gradient(y - coords[k])[0]
        return grad_cache[k]

    raws, grads, keep = [], [], []
    for i in idx:
        a1 = 8.0 * ell - d[i] / h
        a2 = d[i] / h - ell
        closer = np.flatnonzero(d < d[i])
        if closer.size:
            nb = space.norm(coords[closer] - coords[i]) <= P.neighbour_radius * h
            closer = closer[nb]
        aj = (d[closer] - d[i]) / h + delta
        vals = xi(np.concatenate([[a1, a2], aj]))
        raw = float(np.prod(vals))
        if raw <= 0.0:
            continue
        ders = xi.derivative(np.concatenate([[a1, a2], aj]))
        gi = ngrad(i)
        logd = ders / vals  # all factors positive here
        g = (-logd[0] + logd[1]) * gi
        for c, k in enumerate(closer):
            if logd[2 + c] != 0.0:
                g = g + logd[2 + c] * (ngrad(k) - gi)
        raws.append(raw)
        grads.append(raw * g / h)
        keep.append(i)
    if not keep:
        return None
    return level.centers[pos[keep]], np.asarray(raws), np.asarray(grads)


def eval_c1_partition(P: C1Partition, y) -> Weights:
    X = P.X
    y = np.asarray(y, dtype=float).ravel()
    D, _ = X.tree.query(y, k=1, p=X.space.p)
    D = float(D)
    if D == 0.0:
        e = np.empty(0)
        return Weights(np.empty(0, int), np.empty(0, int), e, 0.0,
                       grads=np.empty((0, X.d)), raw=e, on_set=True)
    scales = c1_scales(D, P.ell, P.delta)
    P.complex.require(scales, D)
    out_n, out_i, out_r, out_g = [], [], [], []
    for n in scales:
        res = _c1_level(P, P.complex.levels[n], y, D)
        if res is None:
            continue
        centers, raws, grads = res
        out_n.extend([n] * centers.size)
        out_i.extend(centers.tolist())
        out_r.append(raws)
        out_g.append(grads)
    if not out_r:
        raise RangeError(f"no C^1 weight is positive at dist {D:.6g}")
    raw = np.concatenate(out_r)
    graw = np.vstack(out_g)
    S = raw.sum()
    w = raw / S
    gw = (graw - w[:, None] * graw.sum(axis=0)) / S
    return Weights(np.asarray(out_n, int), np.asarray(out_i, int), w, D, grads=gw, raw=raw)


@dataclass(frozen=True)
class BatchWeights:
    """Partition values for many queries, as entries sorted by query row.

    ``start[r]:start[r + 1]`` indexes the entries of query row r; rows on X
    have no entries and ``dist == 0``.
    """

    query: np.ndarray
    scales: np.ndarray
    centers: np.ndarray
    weights: np.ndarray
    dist: np.ndarray
    grads: np.ndarray | None = None

    @property
    def start(self) -> np.ndarray:
        return np.searchsorted(self.query, np.arange(self.dist.size + 1))

    @property
    def on_set(self) -> np.ndarray:
        return self.dist == 0.0

    def sums(self) -> np.ndarray:
        return np.bincount(self.query, weights=self.weights, minlength=self.dist.size)

    def row(self, r: int) -> Weights:
        a, b = self.start[r], self.start[r + 1]
        g = None if self.grads is None else self.grads[a:b]
        return Weights(self.scales[a:b], self.centers[a:b], self.weights[a:b],
                       float(self.dist[r]), grads=g, on_set=bool(self.dist[r] == 0.0))


def _segment_max(values, seg, size):
    out = np.full(size, -np.inf)
    np.maximum.at(out, seg, values)
    return out


def eval_lip_batch(P: LipPartition, Y) -> BatchWeights:
    """:func:`eval_lip_partition` for every row of ``Y`` at once."""
    hits = locate_cells_batch(Y, P.complex)
    nq = hits.dist.size
    missing = np.setdiff1d(np.flatnonzero(~hits.on_set), hits.query)
    if missing.size:
        raise RangeError(f"no cell covers query row {missing[0]}", rows=missing)
    top = _segment_max(hits.gauges, hits.query, nq)
    raw = (hits.gauges / top[hits.query]) ** P.m
    S = np.bincount(hits.query, weights=raw, minlength=nq)
    return BatchWeights(hits.query, hits.scales, hits.centers, raw / S[hits.query], hits.dist)


def _c1_level_batch(P: C1Partition, level, Yr):
    """Raw C^1 weights and their gradients at one scale for the rows Yr."""
    space = P.X.space
    h, ell, delta, xi = level.h, P.ell, P.delta, P.xi
    far = 8.0 * ell * h
    d_star, k_star = level.tree.query(Yr, k=1, p=level.p)
    radius = np.where(d_star > (ell - delta) * h, far, np.minimum(far, d_star + delta * h))
    rows = np.flatnonzero(d_star < far)
    if rows.size == 0:
        return None
    rid, pos = ball_lists(level.tree, Yr[rows], radius[rows], level.p)
    rid = rows[rid]
    coords = level.coords[pos]
    d = space.norm(coords - Yr[rid])
    star = level.coords[k_star[rid]]
    near_star = space.norm(coords - star) <= P.neighbour_radius * h
    live = (d > ell * h) & (d < far) & ~(near_star & (d >= d_star[rid] + delta * h))
    if not live.any():
        return None
    # only survivors and centers closer than a row's farthest survivor matter
    reach = _segment_max(np.where(live, d, -np.inf), rid, Yr.shape[0])
    useful = live | (d < reach[rid])
    rid, pos, d, coords, live = rid[useful], pos[useful], d[useful], coords[useful], live[useful]
    # order every row by distance so that closer centers form a prefix
    order = np.lexsort((pos, d, rid))
    rid, pos, d, coords, live = rid[order], pos[order], d[order], coords[order], live[order]
    first = np.searchsorted(rid, rid, side="left")
    surv = np.flatnonzero(live)
    counts = surv - first[surv]
    owner = np.repeat(np.arange(surv.size), counts)
    j = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts) + np.repeat(first[surv], counts)
    i = surv[owner]
    keep = (d[j] < d[i]) & (space.norm(coords[j] - coords[i]) <= P.neighbour_radius * h)
    owner, i, j = owner[keep], i[keep], j[keep]
    t = (d[j] - d[i]) / h + delta
    vals, ders = xi(t), xi.derivative(t)
    zero = np.bincount(owner, weights=(vals <= 0.0), minlength=surv.size) > 0
    a1 = 8.0 * ell - d[surv] / h
    a2 = d[surv] / h - ell
    v1, v2 = xi(a1), xi(a2)
    alive = ~zero & (v1 > 0) & (v2 > 0)
    pos_vals = np.where(vals > 0, vals, 1.0)
    logprod = np.bincount(owner, weights=np.log(pos_vals), minlength=surv.size)
    # exact products where cheap: most survivors have no factor below 1
    prod = np.where(np.bincount(owner, minlength=surv.size) == 0, 1.0, np.exp(logprod))
    raw = v1 * v2 * prod
    alive &= raw > 0
    Ysurv = Yr[rid[surv]]
    gi = space.norm_gradient(Ysurv - coords[surv])
    coef = -xi.derivative(a1) / np.where(v1 > 0, v1, 1.0) + xi.derivative(a2) / np.where(v2 > 0, v2, 1.0)
    g = coef[:, None] * gi
    if owner.size:
        gj = space.norm_gradient(Yr[rid[j]] - coords[j])
        w = ders / pos_vals
        contrib = w[:, None] * (gj - gi[owner])
        for k in range(space.dimension):
            g[:, k] += np.bincount(owner, weights=contrib[:, k], minlength=surv.size)
    sel = np.flatnonzero(alive)
    return (rid[surv[sel]], pos[surv[sel]], level.centers[pos[surv[sel]]],
            raw[sel], raw[sel, None] * g[sel] / h)


def eval_c1_batch(P: C1Partition, Y) -> BatchWeights:
    """:func:`eval_c1_partition` for every row of ``Y`` at once."""
    X = P.X
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    D = batch_dist(X, Y)
    off = np.flatnonzero(D > 0)
    needed = {int(r): c1_scales(float(D[r]), P.ell, P.delta) for r in off}
    _require_batch(P.complex, D, needed)
    lo, hi = P.ell - 2.0 - P.delta, 8.0 * P.ell
    parts = []
    for n in sorted({n for ns in needed.values() for n in ns}):
        h = 2.0 ** n
        rows = off[(lo * h <= D[off]) & (D[off] <= hi * h)]
        if rows.size == 0:
            continue
        res = _c1_level_batch(P, P.complex.levels[n], Y[rows])
        if res is None:
            continue
        r, pos, centers, raw, graw = res
        parts.append((rows[r], np.full(r.size, n), pos, centers, raw, graw))
    if not parts:
        q = np.empty(0, int)
        raw, graw, s_, c_, p_ = np.empty(0), np.empty((0, X.d)), q, q, q
    else:
        q, s_, p_, c_, raw = (np.concatenate([a[k] for a in parts]) for k in range(5))
        graw = np.vstack([a[5] for a in parts])
        order = np.lexsort((p_, s_, q))
        q, s_, c_, raw, graw = q[order], s_[order], c_[order], raw[order], graw[order]
    missing = np.setdiff1d(off, q)
    if missing.size:
        raise RangeError(f"no C^1 weight is positive at query row {missing[0]}", rows=missing)
    nq = D.size
    S = np.bincount(q, weights=raw, minlength=nq)
    w = raw / S[q]
    G = np.stack([np.bincount(q, weights=graw[:, k], minlength=nq) for k in range(X.d)], axis=1)
    gw = (graw - w[:, None] * G[q]) / S[q][:, None]
    return BatchWeights(q, s_, c_, w, D, grads=gw)


def _fd_slopes(P: LipPartition, y, base: Weights, step: float, directions) -> float:
    """Sum over weights of their largest finite-difference slope at y."""
    keys = base.keys()
    w0 = dict(zip(keys, base.weights.tolist()))
    best: dict = {}
    for v in directions:
        w1 = eval_lip_partition(P, y + step * v).as_dict()
        for k in set(w0) | set(w1):
            s = abs(w1.get(k, 0.0) - w0.get(k, 0.0)) / step
            if s > best.get(k, 0.0):
                best[k] = s
    return float(sum(best.values()))


def slope_sum_audit(P, queries, rel_step=1e-6, n_directions=8, seed=0) -> dict:
    """max over queries of dist(y, X) * sum_i |grad phi_i|(y).

    C^1 partitions use analytic gradients measured in the dual norm; Lipschitz
    partitions use one-sided difference quotients along axis and random
    directions with step ``rel_step * dist(y, X)``.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    space = P.X.space
    rng = np.random.default_rng(seed)
    values = []
    for y in queries:
        if isinstance(P, C1Partition):
            W = eval_c1_partition(P, y)
            if W.on_set:
                continue
            total = float(space.dual_norm(W.grads).sum())
        else:
            W = eval_lip_partition(P, y)
            if W.on_set:
                continue
            eye = np.eye(space.dimension)
            dirs = np.vstack([eye, -eye, rng.standard_normal((n_directions, space.dimension))])
            dirs = dirs / space.norm(dirs)[:, None]
            total = _fd_slopes(P, y, W, rel_step * W.dist, dirs)
        values.append(W.dist * total)
    values = np.asarray(values)
    return {
        "kind": "c1" if isinstance(P, C1Partition) else "lip",
        "m": P.m,
        "queries": int(values.size),
        "max": float(values.max()) if values.size else 0.0,
        "mean": float(values.mean()) if values.size else 0.0,
        "finite": bool(np.all(np.isfinite(values))),
    }
