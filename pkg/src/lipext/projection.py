"""Random projections of the ambient space onto a finite point set.

A random projection sends each ambient point y to a probability measure mu_y
on X with mu_x = delta_x on X. Two constructions are provided: one from the
Lipschitz cell partition and one from a smooth kernel against a reference
measure on X. The C^1 partition gives a regular projection whose derivative
is the zero-mass vector measure nu_y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metric import PointSet, dist_to_set, default_doubling
from .covering import ball_lists, batch_dist
from .partitions import (C1Partition, LipPartition, eval_c1_batch, eval_c1_partition, eval_lip_batch,
                         eval_lip_partition)
from .wasserstein import w1_exact


@dataclass(frozen=True)
class DiscreteMeasure:
    support: np.ndarray
    weights: np.ndarray

    @classmethod
    def dirac(cls, index: int) -> "DiscreteMeasure":
        return cls(np.array([index]), np.array([1.0]))

    @property
    def is_dirac(self) -> bool:
        return self.support.size == 1

    def mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integral of per-point values (shape (N, ...)) against the measure."""
        values = np.asarray(values, dtype=float)
        return np.tensordot(self.weights, values[self.support], axes=(0, 0))

    def to_dict(self):
        return {"support": [int(i) for i in self.support], "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["support"], int), np.asarray(data["weights"], float))


@dataclass(frozen=True)
class VectorMeasure:
    """Atoms carrying covectors; ``integrate(f)`` is the differential of y -> int f dmu_y."""

    support: np.ndarray
    covectors: np.ndarray

    def total(self) -> np.ndarray:
        return self.covectors.sum(axis=0)

    def total_variation(self, space) -> float:
        return float(space.dual_norm(self.covectors).sum()) if self.support.size else 0.0

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """sum_i values[x_i] (outer) c_i, shape values.shape[1:] + (d,)."""
        values = np.asarray(values, dtype=float)
        return np.tensordot(values[self.support], self.covectors, axes=(0, 0))

    def to_dict(self):
        return {"support": [int(i) for i in self.support], "covectors": self.covectors.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["support"], int), np.asarray(data["covectors"], float))


def _merge(centers: np.ndarray, values: np.ndarray):
    """Sum values sharing a center (cells at different scales share points)."""
    uniq, inv = np.unique(centers, return_inverse=True)
    out = np.zeros((uniq.size,) + values.shape[1:])
    np.add.at(out, inv, values)
    return uniq, out


def smoothstep_bump(t):
    """1 on [0, 2], 1 - 3u^2 + 2u^3 with u = t - 2 on [2, 3], 0 after."""
    t = np.asarray(t, dtype=float)
    u = np.clip(t - 2.0, 0.0, 1.0)
    return 1.0 - 3.0 * u * u + 2.0 * u ** 3


def smoothstep_bump_derivative(t):
    t = np.asarray(t, dtype=float)
    u = np.clip(t - 2.0, 0.0, 1.0)
    return -6.0 * u + 6.0 * u * u


@dataclass(frozen=True)
class KernelProfile:
    m: float = 1.0
    reach: float = 3.0

    def __post_init__(self):
        if self.m < 1.0:
            object.__setattr__(self, "m", 1.0)

    def __call__(self, t):
        return smoothstep_bump(t) ** self.m

    @classmethod
    def for_points(cls, X: PointSet, lambda_hat: int | None = None) -> "KernelProfile":
        lam = lambda_hat if lambda_hat is not None else default_doubling(X).lambda_hat
        return cls(max(1.0, math.log(lam) / 3.0))


class CellProjection:
    """mu_y = sum_i phi_i(y) delta_{x_i} from the Lipschitz cell partition."""

    name = "cells"
    support_factor = 16.0

    def __init__(self, partition: LipPartition):
        self.partition = partition
        self.X = partition.X

    def __call__(self, y) -> DiscreteMeasure:
        return project_cells(y, self.partition)


class KernelProjection:
    """mu_y proportional to m(x) phi(|y - x| / dist(y, X))^m on X."""

    name = "kernel"
    support_factor = 3.0

    def __init__(self, X: PointSet, profile: KernelProfile | None = None):
        self.X = X
        self.profile = profile if profile is not None else KernelProfile.for_points(X)

    def __call__(self, y) -> DiscreteMeasure:
        return project_kernel(y, self.X, self.profile)


class RegularProjection:
    """(mu_y, nu_y) from the C^1 partition; nu_y = sum_i d(phi_i)_y delta_{x_i}."""

    name = "regular"

    def __init__(self, partition: C1Partition):
        self.partition = partition
        self.X = partition.X

    def __call__(self, y) -> DiscreteMeasure:
        return project_regular(y, self.partition)[0]

    def pair(self, y):
        return project_regular(y, self.partition)


def project_cells(y, P: LipPartition) -> DiscreteMeasure:
    W = eval_lip_partition(P, y)
    if W.on_set:
        return DiscreteMeasure.dirac(dist_to_set(y, P.X)[1])
    support, w = _merge(W.centers, W.weights)
    return DiscreteMeasure(support, w)


def project_kernel(y, X: PointSet, K: KernelProfile) -> DiscreteMeasure:
    y = np.asarray(y, dtype=float).ravel()
    D, k = dist_to_set(y, X)
    if D == 0.0:
        return DiscreteMeasure.dirac(k)
    idx = np.asarray(X.tree.query_ball_point(y, K.reach * D, p=X.space.p), dtype=int)
    idx = np.sort(idx)
    ratio = X.space.norm(X.points[idx] - y) / D
    w = X.measure[idx] * K(ratio)
    keep = w > 0
    idx, w = idx[keep], w[keep]
    return DiscreteMeasure(idx, w / w.sum())


def project_regular(y, P: C1Partition):
    W = eval_c1_partition(P, y)
    if W.on_set:
        k = dist_to_set(y, P.X)[1]
        return DiscreteMeasure.dirac(k), VectorMeasure(np.empty(0, int), np.empty((0, P.X.d)))
    support, w = _merge(W.centers, W.weights)
    _, c = _merge(W.centers, W.grads)
    return DiscreteMeasure(support, w), VectorMeasure(support, c)


@dataclass(frozen=True)
class BatchMeasures:
    """Projections of many queries as (row, atom) entries sorted by row.

    Atoms of one row may repeat a point of X (one per cell); integrals are
    unaffected. Rows on X hold a single Dirac entry of weight 1.
    """

    query: np.ndarray
    support: np.ndarray
    weights: np.ndarray
    dist: np.ndarray
    covectors: np.ndarray | None = None

    @property
    def on_set(self) -> np.ndarray:
        return self.dist == 0.0

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Row-wise integral of per-point values of shape (N, k)."""
        values = np.asarray(values, dtype=float)
        v = values[self.support] * self.weights[:, None]
        nq = self.dist.size
        return np.stack([np.bincount(self.query, weights=v[:, c], minlength=nq)
                         for c in range(values.shape[1])], axis=1)

    def measure(self, r: int) -> DiscreteMeasure:
        a, b = np.searchsorted(self.query, [r, r + 1])
        support, w = _merge(self.support[a:b], self.weights[a:b])
        return DiscreteMeasure(support, w)


def _nearest_rows(X: PointSet, Y: np.ndarray, rows: np.ndarray) -> np.ndarray:
    return np.asarray([dist_to_set(Y[r], X)[1] for r in rows], dtype=int)


def _with_diracs(X, Y, D, q, s, w, c=None) -> BatchMeasures:
    rows = np.flatnonzero(D == 0.0)
    if rows.size:
        q = np.concatenate([q, rows])
        s = np.concatenate([s, _nearest_rows(X, Y, rows)])
        w = np.concatenate([w, np.ones(rows.size)])
        if c is not None:
            c = np.vstack([c, np.zeros((rows.size, X.d))])
        order = np.argsort(q, kind="stable")
        q, s, w = q[order], s[order], w[order]
        if c is not None:
            c = c[order]
    return BatchMeasures(q, s, w, D, c)


def project_batch(proj, Y) -> BatchMeasures:
    """Evaluate a projection at every row of ``Y`` in one vectorized pass."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    X = proj.X
    if isinstance(proj, KernelProjection):
        D = batch_dist(X, Y)
        rows = np.flatnonzero(D > 0)
        rid, pos = ball_lists(X.tree, Y[rows], proj.profile.reach * D[rows], X.space.p)
        ratio = X.space.norm(X.points[pos] - Y[rows][rid]) / D[rows][rid]
        w = X.measure[pos] * proj.profile(ratio)
        keep = w > 0
        rid, pos, w = rid[keep], pos[keep], w[keep]
        S = np.bincount(rid, weights=w, minlength=rows.size)
        return _with_diracs(X, Y, D, rows[rid], pos, w / S[rid])
    if isinstance(proj, CellProjection):
        B = eval_lip_batch(proj.partition, Y)
        return _with_diracs(X, Y, B.dist, B.query, B.centers, B.weights)
    if isinstance(proj, RegularProjection):
        B = eval_c1_batch(proj.partition, Y)
        return _with_diracs(X, Y, B.dist, B.query, B.centers, B.weights, B.grads)
    raise TypeError(f"no batch evaluation for {type(proj).__name__}")


def audit_pairs(X: PointSet, count: int, seed: int = 0, inflate: float = 0.25,
                max_rel_step: float = 0.5):
    """Deterministic (y, y') pairs for Lipschitz audits.

    y is uniform in the bounding box inflated by ``inflate`` (off X); y' is y
    moved in a random unit direction by a step of up to ``max_rel_step``
    times dist(y, X), log-uniformly distributed down to 1e-3 of that.
    """
    from .spaces import sample_queries

    rng = np.random.default_rng(seed)
    ys = sample_queries(X, count, seed=seed, inflate=inflate)
    dirs = rng.standard_normal(ys.shape)
    dirs /= X.space.norm(dirs)[:, None]
    dd, _ = X.tree.query(ys, k=1, p=X.space.p)
    rel = max_rel_step * 10.0 ** rng.uniform(-3.0, 0.0, size=count)
    ys2 = ys + (rel * dd)[:, None] * dirs
    dd2, _ = X.tree.query(ys2, k=1, p=X.space.p)
    ok = dd2 > 0
    return ys[ok], ys2[ok]


def projection_lip_audit(proj, pairs) -> dict:
    """max over pairs of W1(mu_y, mu_y') / |y - y'|."""
    ys, ys2 = pairs
    X = proj.X
    best = 0.0
    ratios = []
    for y, y2 in zip(np.atleast_2d(ys), np.atleast_2d(ys2)):
        step = float(X.space.norm(y - y2))
        if step == 0.0:
            ratios.append(0.0)
            continue
        w, _ = w1_exact(proj(y), proj(y2), X)
        ratios.append(w / step)
        best = max(best, ratios[-1])
    return {"method": getattr(proj, "name", type(proj).__name__), "pairs": len(ratios),
            "max_ratio": best, "mean_ratio": float(np.mean(ratios)) if ratios else 0.0}


def support_radius_ratio(mu: DiscreteMeasure, y, X: PointSet) -> float:
    """max over the support of |y - x| / dist(y, X); 0 for Dirac masses on X."""
    D, _ = dist_to_set(y, X)
    if D == 0.0:
        return 0.0
    return float(np.max(X.space.norm(X.points[mu.support] - np.asarray(y)))) / D
