
import numpy as np
import pytest
from hypothesis import given, strategies as st

from lipext.covering import CellComplex, c1_scales, lip_scales
from lipext.metric import AmbientSpace, PointSet
from lipext.partitions import (C1Partition, LipPartition, XiError, build_xi, eval_c1_batch,
                               eval_c1_partition, eval_lip_batch, eval_lip_partition,
                               slope_sum_audit)
from lipext.spaces import SpaceSpec, generate_space, sample_queries

from strategies import point_arrays


# ---------------------------------------------------------------- xi

def test_branch_profile_anchors():
    xi = build_xi(5.5, 0.5, profile="branch")
    assert xi(0.0) == 0.0 and xi(0.5) == 1.0
    assert float(xi(xi.t1)) == pytest.approx(0.5, abs=1e-14)
    f_half = float(xi.f(0.5))
    eps = 1e-9
    assert float(xi.derivative(xi.t1 - eps)) == pytest.approx(f_half, rel=1e-6)
    assert float(xi.derivative(xi.t1 + eps)) == pytest.approx(f_half, rel=1e-6)
    # the equality branch holds up to rounding
    assert xi.check() <= 1e-12 * float(xi.f(1.0))


@pytest.mark.parametrize("profile", ["power", "branch"])
@given(m=st.floats(1.01, 60.0), delta=st.sampled_from([0.25, 0.5, 1.0]))
def test_xi_inequality_holds(profile, m, delta):
    xi = build_xi(m, delta, check_points=2000, profile=profile)
    t = np.linspace(-0.1, 1.1 * delta, 3001)
    x = xi(t)
    assert np.all(xi.derivative(t) <= xi.f(x) * (1 + 1e-12))
    assert np.all(np.diff(x) >= -1e-15) and x.min() == 0.0 and x.max() == 1.0


def test_power_profile_derivative_matches_finite_differences():
    xi = build_xi(12.0, 0.5)
    t = np.linspace(0.01, 0.49, 50)
    fd = (xi(t + 1e-7) - xi(t - 1e-7)) / 2e-7
    np.testing.assert_allclose(xi.derivative(t), fd, rtol=1e-5, atol=1e-9)


@pytest.mark.parametrize("m,delta,profile", [(1.0, 0.5, "power"), (0.5, 0.5, "branch"),
                                             (3.0, 0.0, "power"), (3.0, 0.5, "smooth")])
def test_build_xi_rejects(m, delta, profile):
    with pytest.raises(XiError):
        build_xi(m, delta, profile=profile)


# ---------------------------------------------------------------- oracles

def _brute_net(P, r):
    centers = []
    for i, x in enumerate(P):
        if all(np.linalg.norm(x - P[c]) >= 2 * r for c in centers):
            centers.append(i)
    return centers


def _lip_oracle(P, y, m):
    """Gauges straight from the formula, over every center of every admissible scale."""
    D = np.linalg.norm(P - y, axis=1).min()
    out = {}
    for n in lip_scales(D):
        h = 2.0 ** n
        net = _brute_net(P, h)
        d = {c: np.linalg.norm(P[c] - y) for c in net}
        for i in net:
            others = [d[j] for j in net if j != i]
            terms = [h / 2, D - h / 2, 2.5 * h - D, 6 * h - d[i]]
            if others:
                terms.append(h / 2 + 0.5 * (min(others) - d[i]))
            g = max(0.0, min(terms))
            if g > 0:
                out[(n, i)] = g ** m
    s = sum(out.values())
    return {k: v / s for k, v in out.items()}


def _c1_oracle(P, y, xi, ell=3.0, delta=0.5):
    D = np.linalg.norm(P - y, axis=1).min()
    out = {}
    for n in c1_scales(D, ell, delta):
        h = 2.0 ** n
        net = _brute_net(P, h)
        d = {c: np.linalg.norm(P[c] - y) for c in net}
        for i in net:
            raw = float(xi(8 * ell - d[i] / h)) * float(xi(d[i] / h - ell))
            for j in net:
                if d[j] < d[i] and np.linalg.norm(P[j] - P[i]) <= (9 * ell - delta) * h:
                    raw *= float(xi((d[j] - d[i]) / h + delta))
            if raw > 0:
                out[(n, i)] = raw
    s = sum(out.values())
    return {k: v / s for k, v in out.items()}


def _as_dict(W):
    acc = {}
    for k, w in zip(W.keys(), W.weights):
        acc[k] = acc.get(k, 0.0) + w
    return acc


def test_two_point_lip_weights_by_hand():
    X = PointSet(np.array([[0.0], [1.0]]))
    P = LipPartition(CellComplex(X, -6, 3), m=2.0)
    W = _as_dict(eval_lip_partition(P, np.array([0.5])))
    # scales -2 and -1; gauges 1/8 and 1/4 on both centers
    assert W == pytest.approx({(-2, 0): 0.1, (-2, 1): 0.1, (-1, 0): 0.4, (-1, 1): 0.4})
    assert W == pytest.approx(_lip_oracle(X.points, np.array([0.5]), 2.0))


def test_single_and_symmetric_weights():
    X = PointSet(np.array([[0.0], [1.0]]))
    P = LipPartition(CellComplex(X, -8, 3), m=1.5)
    W = eval_lip_partition(P, np.array([-0.01]))
    assert set(W.centers.tolist()) == {0}
    assert W.weights.sum() == pytest.approx(1.0)
    Wm = eval_lip_partition(P, np.array([0.5]))
    by_center = np.bincount(Wm.centers, weights=Wm.weights)
    assert by_center == pytest.approx([0.5, 0.5])


@given(point_arrays(7, 2), st.integers(0, 10_000))
def test_lip_partition_matches_oracle(Pts, seed):
    X = PointSet(Pts)
    y = sample_queries(X, 1, seed=seed)[0]
    P = LipPartition(CellComplex.for_queries(X, y[None]), m=2.5)
    W = _as_dict(eval_lip_partition(P, y))
    ref = _lip_oracle(Pts, y, 2.5)
    assert W.keys() == ref.keys()
    assert W == pytest.approx(ref, abs=1e-13)


@given(point_arrays(6, 2), st.integers(0, 10_000))
def test_c1_partition_matches_oracle(Pts, seed):
    X = PointSet(Pts)
    y = sample_queries(X, 1, seed=seed)[0]
    P = C1Partition(CellComplex.for_queries(X, y[None]), lambda_hat=4)
    W = _as_dict(eval_c1_partition(P, y))
    ref = _c1_oracle(Pts, y, P.xi)
    assert W.keys() == ref.keys()
    assert W == pytest.approx(ref, abs=1e-12)


# ---------------------------------------------------------------- C^1 partition

@pytest.fixture(scope="module")
def c1_setup():
    X = generate_space(SpaceSpec("cantor", 1, 3))
    Q = sample_queries(X, 400, seed=9)
    shifts = [s * e for e in (1e-6, 1e-7) for s in (1, -1)]
    C = CellComplex.for_queries(X, np.vstack([Q] + [Q + s for s in shifts]))
    return X, Q, C1Partition(C)


def test_window_has_unit_raw_weight():
    X = generate_space(SpaceSpec("grid", 2, 4))
    ell = 3.0
    for y in sample_queries(X, 200, seed=4):
        D = np.linalg.norm(X.points - y, axis=1).min()
        P = C1Partition(CellComplex.for_queries(X, y[None]))
        W = eval_c1_partition(P, y)
        n_window = [n for n in set(W.scales.tolist()) if 2 * ell <= D / 2.0 ** n <= 4 * ell]
        if n_window:
            assert W.raw[np.isin(W.scales, n_window)].max() == 1.0
            assert W.raw.sum() >= 1.0


def _fd_errors(P, Q, eps):
    """Per query: max over weights of |fd - grad|, relative to max(|grad|, 1/dist)."""
    out = []
    for y in Q:
        W = eval_c1_partition(P, y)
        plus, minus = _as_dict(eval_c1_partition(P, y + eps)), _as_dict(eval_c1_partition(P, y - eps))
        scale = max(np.abs(W.grads).max(), 1.0 / W.dist)
        out.append(max(abs((plus.get(k, 0.0) - minus.get(k, 0.0)) / (2 * eps) - g) / scale
                       for k, g in zip(W.keys(), W.grads[:, 0])))
    return np.asarray(out)


def test_c1_weight_gradients_match_finite_differences(c1_setup):
    X, Q, P = c1_setup
    coarse, fine = _fd_errors(P, Q[:150], 1e-6), _fd_errors(P, Q[:150], 1e-7)
    # at step 1e-6 a few queries carry visible truncation error of the quotient
    assert np.mean(coarse <= 1e-5) >= 0.97
    # second-order convergence pins that error on the quotient, not the gradient
    big = coarse > 1e-7
    assert np.all(fine[big] <= coarse[big] / 50)
    assert fine.max() <= 1e-5


def test_c1_gradients_sum_to_zero_and_batch_agrees(c1_setup):
    X, Q, P = c1_setup
    B = eval_c1_batch(P, Q)
    G = np.bincount(B.query, weights=B.grads[:, 0])
    assert np.abs(G).max() * B.dist.max() <= 1e-10
    assert np.abs(B.sums() - 1).max() <= 1e-12
    for r in range(0, len(Q), 37):
        W = eval_c1_partition(P, Q[r])
        Wb = B.row(r)
        np.testing.assert_allclose(Wb.weights, W.weights, atol=1e-15)
        np.testing.assert_allclose(Wb.grads, W.grads, rtol=1e-11, atol=1e-12 / W.dist)


def test_lip_batch_agrees_with_single():
    X = generate_space(SpaceSpec("grid", 2, 6))
    Q = sample_queries(X, 300, seed=5)
    P = LipPartition(CellComplex.for_queries(X, Q))
    B = eval_lip_batch(P, Q)
    for r in range(0, len(Q), 23):
        assert _as_dict(B.row(r)) == pytest.approx(_as_dict(eval_lip_partition(P, Q[r])), abs=1e-15)


def test_partition_in_a_p_norm():
    X = PointSet(generate_space(SpaceSpec("grid", 2, 5)).points, AmbientSpace(2, 3.0))
    Q = sample_queries(X, 500, seed=6)
    C = CellComplex.for_queries(X, Q)
    assert np.abs(eval_lip_batch(LipPartition(C), Q).sums() - 1).max() <= 1e-12
    assert np.abs(eval_c1_batch(C1Partition(C), Q).sums() - 1).max() <= 1e-12


# ---------------------------------------------------------------- slope audits

def test_singleton_slope_audit_is_scale_free():
    X = PointSet(np.array([[0.0]]))
    # the construction commutes with dyadic rescaling; sample one full period
    period = 2.0 ** np.linspace(0.0, 1.0, 17)[:-1]
    vals = []
    for r in (2.0 ** -7, 1.0, 2.0 ** 7):
        Q = np.concatenate([r * period, -r * period])[:, None]
        P = LipPartition(CellComplex.for_queries(X, Q), m=1.5)
        a = slope_sum_audit(P, Q)
        assert a["finite"]
        vals.append(a["max"])
    assert vals == pytest.approx([vals[0]] * 3, rel=1e-6)


def test_c1_slope_audit_is_finite():
    X = generate_space(SpaceSpec("grid", 2, 4))
    Q = sample_queries(X, 60, seed=7)
    a = slope_sum_audit(C1Partition(CellComplex.for_queries(X, Q)), Q)
    assert a["finite"] and a["queries"] == 60 and a["max"] > 0


@pytest.mark.parametrize("profile", ["power", "branch"])
def test_xi_inequality_survives_underflow(profile):
    xi = build_xi(20.0, 1.0, check_points=2000, profile=profile)
    t = np.array([1e-300, 1.4e-17, 1e-16, 1e-8])
    assert np.all(xi.derivative(t) <= xi.f(xi(t)))
