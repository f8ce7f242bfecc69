import numpy as np
import pytest

from lipext.extension import lipschitz_constant
from lipext.metric import DataError, PointSet
from lipext.spaces import (SpaceSpec, generate_space, mcshane_function, parse_label,
                           sample_queries)


def test_grid_and_cantor_examples():
    assert generate_space(SpaceSpec("grid", 1, 3)).points[:, 0].tolist() == [0.0, 0.5, 1.0]
    c = generate_space(SpaceSpec("cantor", 1, 2)).points[:, 0]
    np.testing.assert_allclose(c, [0, 1 / 9, 2 / 9, 1 / 3, 2 / 3, 7 / 9, 8 / 9, 1], atol=1e-15)
    assert len(generate_space(SpaceSpec("grid", 3, 4))) == 64


@pytest.mark.parametrize("spec", [SpaceSpec("random-cloud", 2, 30, seed=4),
                                  SpaceSpec("sphere-net", 3, 40, seed=2)])
def test_determinism(spec):
    a, b = generate_space(spec), generate_space(spec)
    assert np.array_equal(a.points, b.points)


def test_sphere_net_lies_on_the_sphere():
    X = generate_space(SpaceSpec("sphere-net", 3, 40, seed=1))
    np.testing.assert_allclose(np.linalg.norm(X.points, axis=1), 1.0, rtol=1e-12)
    assert len(X) > 5


@pytest.mark.parametrize("spec", [SpaceSpec("torus", 2, 4), SpaceSpec("cantor", 2, 3),
                                  SpaceSpec("sphere-net", 1, 5), SpaceSpec("grid", 0, 3)])
def test_invalid_specs(spec):
    with pytest.raises(DataError):
        generate_space(spec)


def test_labels_round_trip():
    for spec in (SpaceSpec("grid", 2, 8), SpaceSpec("cantor", 1, 4),
                 SpaceSpec("random-cloud", 3, 50)):
        assert parse_label(spec.label) == spec
    with pytest.raises(DataError):
        parse_label("grid-8")


def test_queries_inside_inflated_box_and_off_set():
    X = generate_space(SpaceSpec("grid", 2, 3))
    Q = sample_queries(X, 5000, seed=3)
    assert Q.min() >= -0.25 and Q.max() <= 1.25
    assert np.all(np.linalg.norm(X.points[None] - Q[:, None], axis=2).min(axis=1) > 0)
    assert np.array_equal(Q, sample_queries(X, 5000, seed=3))


def test_mcshane_examples():
    X = PointSet(np.array([[1.0, 1.0], [2.0, 2.0], [4.0, 4.0], [0.0, 3.0]]))
    q = np.zeros((1, 2))
    f, F = mcshane_function(X, anchors=q, offsets=np.array([0.0]))
    np.testing.assert_allclose(f.values[:, 0], np.linalg.norm(X.points, axis=1))
    # two points on a ray from the anchor realize slope exactly 1
    assert abs(f.values[1, 0] - f.values[0, 0]) == pytest.approx(np.sqrt(2))
    assert lipschitz_constant(f.values, X) == pytest.approx(1.0)
    two, _ = mcshane_function(X, anchors=np.array([[0.0, 0.0], [3.0, 0.0]]),
                              offsets=np.array([0.1, 0.4]))
    assert lipschitz_constant(two.values, X) <= 1.0 + 1e-12
    shifted, _ = mcshane_function(X, anchors=np.array([[0.0, 0.0], [3.0, 0.0]]),
                                  offsets=np.array([1.1, 1.4]))
    np.testing.assert_allclose(shifted.values, two.values + 1.0)
    with pytest.raises(DataError):
        mcshane_function(X, anchors=0)
