"""Exact Wasserstein-1 distance between finitely supported measures.

The transport problem is solved as a min-cost flow on the bipartite support
graph by successive shortest augmenting paths with Dijkstra and node
potentials. Masses are converted to integers with denominator 2**64 so that
the combinatorial part of the solver is exact; costs stay in floating point.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .metric import DataError, PointSet

MASS_DENOMINATOR = 1 << 64
MASS_TOL = 1e-10


@dataclass(frozen=True)
class TransportPlan:
    source: np.ndarray  # X indices
    target: np.ndarray
    mass: np.ndarray
    cost: float

    def marginals(self):
        src = {}
        dst = {}
        for s, t, m in zip(self.source.tolist(), self.target.tolist(), self.mass.tolist()):
            src[s] = src.get(s, 0.0) + m
            dst[t] = dst.get(t, 0.0) + m
        return src, dst

    def to_dict(self):
        return {"cost": self.cost,
                "entries": [[int(s), int(t), float(m)] for s, t, m in
                            zip(self.source, self.target, self.mass)]}


def _to_units(weights: np.ndarray) -> list[int]:
    return [int(round(w * MASS_DENOMINATOR)) for w in weights]


def _balance(a: list[int], b: list[int]) -> None:
    """Move the integer rounding residue onto the largest atom of b."""
    diff = sum(a) - sum(b)
    if diff:
        k = max(range(len(b)), key=b.__getitem__)
        b[k] += diff
        if b[k] < 0:
            raise DataError("mass balancing produced a negative atom")


def min_cost_transport(supply: list[int], demand: list[int], cost: np.ndarray):
    """Successive shortest paths on the complete bipartite graph.

    Returns the integer flow matrix. Residual arcs are forward (i -> j,
    unbounded) and backward (j -> i, bounded by the current flow). A virtual
    super-source feeds every source with remaining supply; its potential is
    the largest active source potential, so its arcs have nonnegative reduced
    cost and Dijkstra applies.
    """
    ns, nt = len(supply), len(demand)
    flow = [[0] * nt for _ in range(ns)]
    sup = list(supply)
    dem = list(demand)
    pot_s = [0.0] * ns
    pot_t = [0.0] * nt
    C = cost.tolist()
    inf = float("inf")
    while True:
        sources = [i for i in range(ns) if sup[i] > 0]
        if not sources:
            break
        pi_root = max(pot_s[i] for i in sources)
        dist_s = [inf] * ns
        dist_t = [inf] * nt
        prev_t = [-1] * nt  # source preceding target j on the path
        prev_s = [-1] * ns  # target preceding source i (backward arc), -1 at the root
        heap = []
        for i in sources:
            dist_s[i] = pi_root - pot_s[i]
            heap.append((dist_s[i], 0, i))
        heapq.heapify(heap)
        done_s = [False] * ns
        done_t = [False] * nt
        while heap:
            dv, side, v = heapq.heappop(heap)
            if side == 0:
                if done_s[v] or dv > dist_s[v]:
                    continue
                done_s[v] = True
                row = C[v]
                pv = pot_s[v]
                for j in range(nt):
                    if not done_t[j]:
                        nd = dv + max(row[j] + pv - pot_t[j], 0.0)
                        if nd < dist_t[j]:
                            dist_t[j] = nd
                            prev_t[j] = v
                            heapq.heappush(heap, (nd, 1, j))
            else:
                if done_t[v] or dv > dist_t[v]:
                    continue
                done_t[v] = True
                pv = pot_t[v]
                for i in range(ns):
                    if flow[i][v] > 0 and not done_s[i]:
                        nd = dv + max(pv - C[i][v] - pot_s[i], 0.0)
                        if nd < dist_s[i]:
                            dist_s[i] = nd
                            prev_s[i] = v
                            heapq.heappush(heap, (nd, 0, i))
        sinks = [j for j in range(nt) if dem[j] > 0 and dist_t[j] < inf]
        if not sinks:
            raise DataError("transport problem is infeasible")
        # compare true path lengths, which differ from reduced ones by the end potential
        t = min(sinks, key=lambda j: (dist_t[j] + pot_t[j], j))
        finite = [x for x in dist_s + dist_t if x < inf]
        cap = max(finite)
        for i in range(ns):
            pot_s[i] += dist_s[i] if dist_s[i] < inf else cap
        for j in range(nt):
            pot_t[j] += dist_t[j] if dist_t[j] < inf else cap
        path = []
        j = t
        while True:
            i = prev_t[j]
            path.append((i, j, +1))
            if prev_s[i] == -1:
                break
            jj = prev_s[i]
            path.append((i, jj, -1))
            j = jj
        src = path[-1][0]
        amount = min(sup[src], dem[t])
        for i, j, sgn in path:
            if sgn < 0:
                amount = min(amount, flow[i][j])
        for i, j, sgn in path:
            flow[i][j] += sgn * amount
        sup[src] -= amount
        dem[t] -= amount
    return flow


def w1_exact(mu, nu, X: PointSet):
    """W1 between two probability measures on X, with an optimal plan.

    ``mu`` and ``nu`` are :class:`~lipext.projection.DiscreteMeasure`-like
    objects with ``support`` (X indices) and ``weights``.
    """
    ws, wt = np.asarray(mu.weights, float), np.asarray(nu.weights, float)
    if abs(ws.sum() - wt.sum()) > MASS_TOL:
        raise DataError(f"mass mismatch: {ws.sum()!r} vs {wt.sum()!r}")
    s_idx = np.asarray(mu.support, int)
    t_idx = np.asarray(nu.support, int)
    keep_s, keep_t = ws > 0, wt > 0
    s_idx, ws = s_idx[keep_s], ws[keep_s]
    t_idx, wt = t_idx[keep_t], wt[keep_t]
    cost = X.space.norm(X.points[s_idx][:, None, :] - X.points[t_idx][None, :, :])
    if s_idx.size == 1 or t_idx.size == 1:
        if s_idx.size == 1:
            mass = wt * (ws[0] / wt.sum())
            plan = TransportPlan(np.repeat(s_idx, t_idx.size), t_idx, mass, 0.0)
            c = float(cost[0] @ mass)
        else:
            mass = ws * (wt[0] / ws.sum())
            plan = TransportPlan(s_idx, np.repeat(t_idx, s_idx.size), mass, 0.0)
            c = float(cost[:, 0] @ mass)
        return c, TransportPlan(plan.source, plan.target, plan.mass, c)
    a, b = _to_units(ws), _to_units(wt)
    _balance(a, b)
    flow = min_cost_transport(a, b, cost)
    src, dst, mass = [], [], []
    total = 0.0
    for i, row in enumerate(flow):
        for j, f in enumerate(row):
            if f:
                m = f / MASS_DENOMINATOR
                src.append(int(s_idx[i]))
                dst.append(int(t_idx[j]))
                mass.append(m)
                total += m * cost[i, j]
    plan = TransportPlan(np.asarray(src, int), np.asarray(dst, int), np.asarray(mass), float(total))
    return float(total), plan


def w1_dual_check(mu, nu, f_values: dict, X: PointSet, lip: float | None = None,
                  w1: float | None = None, atol=1e-9) -> float:
    """Return int f dmu - int f dnu and assert it is <= Lip(f) W1(mu, nu).

    ``f_values`` maps X indices in the union of supports to values. ``lip``
    defaults to the exact pairwise Lipschitz constant on those points.
    """
    a = sum(w * f_values[int(i)] for i, w in zip(mu.support, mu.weights))
    b = sum(w * f_values[int(i)] for i, w in zip(nu.support, nu.weights))
    gap = float(a - b)
    if lip is None:
        keys = sorted(f_values)
        if len(keys) > 1:
            P = X.points[keys]
            D = X.space.norm(P[:, None, :] - P[None, :, :])
            v = np.asarray([f_values[k] for k in keys], float)
            dv = np.abs(v[:, None] - v[None, :])
            off = D > 0
            lip = float(np.max(dv[off] / D[off]))
        else:
            lip = 0.0
    if w1 is None:
        w1 = w1_exact(mu, nu, X)[0]
    if gap > lip * w1 + atol:
        raise AssertionError(f"dual value {gap} exceeds Lip(f) W1 = {lip * w1}")
    return gap


def w1_line(points: np.ndarray, wa: np.ndarray, wb: np.ndarray) -> float:
    """Closed-form W1 on the real line: L1 distance of the cumulative weights."""
    points = np.asarray(points, float).ravel()
    order = np.argsort(points, kind="stable")
    x = points[order]
    diff = np.cumsum(np.asarray(wa, float)[order] - np.asarray(wb, float)[order])
    return float(np.sum(np.abs(diff[:-1]) * np.diff(x)))
