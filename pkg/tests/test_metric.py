import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from strategies import point_arrays

from lipext.metric import (AmbientSpace, DataError, PointSet, check_packing, critical_radii,
                           default_doubling, dist, dist_to_set, dyadic_k, estimate_capacity,
                           estimate_doubling, slope_estimate, unit_directions)


def test_dist_examples():
    assert dist([1.5, 2.0], [1.5, 2.0]) == 0.0
    assert dist([0.0], [3.0]) == 3.0
    assert dist([0.0, 0.0], [3.0, 4.0]) == 5.0


def test_p_norm_and_dual():
    s = AmbientSpace(2, 3.0)
    assert s.q == pytest.approx(1.5)
    v = np.array([1.0, -2.0])
    assert s.norm(v) == pytest.approx((1 + 8) ** (1 / 3))
    g = s.norm_gradient(v)[0]
    # the gradient of the norm is a unit covector attaining the norm on v
    assert s.dual_norm(g) == pytest.approx(1.0)
    assert g @ v == pytest.approx(s.norm(v))


@pytest.mark.parametrize("p", [1.0, math.inf, 0.5])
def test_space_rejects_bad_exponent(p):
    with pytest.raises(DataError):
        AmbientSpace(1, p)


def test_pointset_validation():
    with pytest.raises(DataError):
        PointSet(np.array([[0.0], [0.0]]))
    with pytest.raises(DataError):
        PointSet(np.array([[np.nan]]))
    with pytest.raises(DataError):
        PointSet(np.empty((0, 2)))


def test_dist_to_set_examples():
    X = PointSet(np.array([[0.0], [1.0]]))
    assert dist_to_set([1.0], X) == (0.0, 1)
    assert dist_to_set([0.25], X) == (0.25, 0)
    assert dist_to_set([0.5], X) == (0.5, 0)  # tie broken by the lower index


def _brute_doubling(X: PointSet) -> int:
    """Independent oracle: smallest X-centered open r-cover of every open 2r-ball."""
    D = X.pairwise()
    ds = np.unique(D[np.triu_indices(len(X), 1)])
    crit = np.unique(np.concatenate([ds, ds / 2]))
    radii = np.concatenate([crit, (crit[:-1] + crit[1:]) / 2, [crit[0] / 2, crit[-1] * 2]])
    best = 1
    for i in range(len(X)):
        for r in radii:
            ball = set(np.flatnonzero(D[i] < 2 * r))
            for size in range(1, len(ball) + 1):
                if any(ball <= set(np.flatnonzero((D[list(c)] < r).any(axis=0)))
                       for c in itertools.combinations(range(len(X)), size)):
                    best = max(best, size)
                    break
    return best


def test_doubling_singleton_and_pair():
    assert estimate_doubling(PointSet(np.array([[0.3]]))).lambda_hat == 1
    assert estimate_doubling(PointSet(np.array([[0.0], [1.0]])), exact=True).lambda_hat <= 2


def test_doubling_matches_oracle_on_eight_point_grid():
    X = PointSet(np.linspace(0, 1, 8)[:, None])
    assert estimate_doubling(X, exact=True).lambda_hat == _brute_doubling(X)


@given(point_arrays(6, 2))
def test_greedy_doubling_bounds_exact(P):
    X = PointSet(P)
    assert estimate_doubling(X).lambda_hat >= estimate_doubling(X, exact=True).lambda_hat


def test_critical_radii_include_gaps():
    X = PointSet(np.array([[0.0], [1.0], [3.0]]))
    r = critical_radii(X)
    for v in (0.5, 1.0, 1.5, 2.0, 3.0):
        assert v in r
    assert r.min() < 0.5 and r.max() > 3.0
    assert np.any((r > 0.5) & (r < 1.0))


def _brute_capacity(X: PointSet, eps: float) -> int:
    """Independent oracle: all center subsets against all combinatorial radii."""
    D = X.pairwise()
    ds = np.unique(D[np.triu_indices(len(X), 1)])
    crit = np.unique(np.concatenate([ds, ds / eps]))
    radii = np.concatenate([(crit[:-1] + crit[1:]) / 2, crit, [crit[0] / 2, crit[-1] * 2]])
    best = 1
    n = len(X)
    for x0 in range(n):
        for r in radii:
            big = set(np.flatnonzero(D[x0] < r))
            for size in range(best + 1, n + 1):
                for c in itertools.combinations(range(n), size):
                    balls = [set(np.flatnonzero(D[k] < eps * r)) for k in c]
                    if all(b <= big for b in balls) and \
                            sum(len(b) for b in balls) == len(set().union(*balls)):
                        best = size
                        break
    return best


def test_capacity_examples():
    single = PointSet(np.array([[0.0]]))
    assert estimate_capacity(single, 0.2).kappa_hat == 1
    X = PointSet(np.array([[0.0], [1.0], [2.0]]))
    est = estimate_capacity(X, 0.2, exhaustive=True)
    assert est.exact
    assert est.kappa_hat == _brute_capacity(X, 0.2)
    assert check_packing(X, 0.2, est.witness)


@given(point_arrays(5, 1), st.sampled_from([0.1, 0.2, 1 / 3, 0.5]))
def test_capacity_matches_oracle(P, eps):
    X = PointSet(P)
    assert estimate_capacity(X, eps, exhaustive=True).kappa_hat == _brute_capacity(X, eps)


@given(st.integers(3, 7).flatmap(lambda n: st.integers(1, 3).flatmap(
    lambda d: point_arrays(n, d))))
def test_doubling_versus_capacity(P):
    """lambda <= kappa(1/5) and kappa(eps) <= lambda^k for 2^-k < eps <= 2^-(k-1)."""
    X = PointSet(P)
    lam = estimate_doubling(X, exact=True).lambda_hat
    assert lam <= estimate_capacity(X, 0.2, exhaustive=True).kappa_hat
    for eps in (0.1, 0.25, 0.5):
        assert estimate_capacity(X, eps, exhaustive=True).kappa_hat <= lam ** dyadic_k(eps)


def test_sampled_capacity_witness_is_valid():
    g = np.linspace(0, 1, 12)
    X = PointSet(np.stack(np.meshgrid(g, g), -1).reshape(-1, 2))
    est = estimate_capacity(X, 0.25, seed=3)
    assert not est.exact and est.kappa_hat >= 1
    assert check_packing(X, 0.25, est.witness)


@pytest.mark.parametrize("eps,k", [(0.5, 2), (0.3, 2), (0.25, 3), (0.2, 3), (0.1, 4), (1.0, 1), (0.75, 1)])
def test_dyadic_k(eps, k):
    assert dyadic_k(eps) == k
    assert 2.0 ** -k < eps <= 2.0 ** -(k - 1)


def test_default_doubling_large_set_is_sampled():
    g = np.linspace(0, 1, 10)
    X = PointSet(np.stack(np.meshgrid(g, g), -1).reshape(-1, 2))
    est = default_doubling(X)
    assert not est.exact and 4 <= est.lambda_hat <= 16


def test_slope_examples(rng):
    dirs = unit_directions(1, 4, rng)
    assert slope_estimate(lambda y: 7.0, np.array([0.3]), [1e-3], dirs).value == 0.0
    assert slope_estimate(lambda y: 3 * y[0], np.array([0.3]), [1e-4, 1e-6],
                          dirs).value == pytest.approx(3.0, abs=1e-9)
    v = slope_estimate(lambda y: np.linalg.norm(y), np.array([0.4, -0.2]), [1e-6],
                       unit_directions(2, 64, rng)).value
    assert v == pytest.approx(1.0, abs=1e-3)


def test_slope_skips_failing_probes():
    def F(y):
        if y[0] > 1:
            raise ValueError("outside")
        return y[0]
    rep = slope_estimate(F, np.array([0.9]), [0.5, 0.01], [np.array([1.0]), np.array([-1.0])])
    assert rep.value == pytest.approx(1.0)
    assert len(rep.skipped) == 1
