import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pharmlab.geometry import (CylCoords, Hyperplane, Sphere, angular_hyperplane, as_point, from_cylindrical,
                               perpendicular_bisector, reflect, rotate, to_cylindrical)

coord = st.floats(-50, 50, allow_nan=False)


def vec(n):
    return st.lists(coord, min_size=n, max_size=n).map(np.array)


def test_cylindrical_examples():
    c = to_cylindrical([1.0, 0, 0])
    assert (c.rho, c.theta, c.xprime) == (1.0, 0.0, (0.0,))
    c = to_cylindrical([0.0, 1.0])
    assert c.rho == 1.0 and c.theta == pytest.approx(np.pi / 2) and c.xprime == ()
    c = to_cylindrical([-1.0, -1.0, 5.0])
    assert c.rho == pytest.approx(np.sqrt(2)) and c.theta == pytest.approx(5 * np.pi / 4) and c.xprime == (5.0,)


def test_axis_point_has_zero_angle():
    assert to_cylindrical([0.0, 0.0, 2.0]).theta == 0.0


@given(vec(4))
def test_cylindrical_round_trip(x):
    c = to_cylindrical(x)
    assert 0 <= c.theta < 2 * np.pi
    np.testing.assert_allclose(from_cylindrical(c), x, atol=1e-10)


def test_rotate_examples():
    np.testing.assert_allclose(rotate([1.0, 0, 0], np.pi / 2), [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(rotate([0.0, 0, 3], 1.234), [0, 0, 3])
    np.testing.assert_allclose(rotate([1.0, 1.0], np.pi), [-1, -1], atol=1e-15)


def test_reflect_examples():
    np.testing.assert_allclose(reflect([1.0, 2, 3], Hyperplane([1.0, 0, 0], 0)), [-1, 2, 3])
    np.testing.assert_allclose(reflect([3.0, 0], Hyperplane([1.0, 0], 1)), [-1, 0])
    L = Hyperplane([1.0, 1.0, 0], 2.0)
    np.testing.assert_allclose(reflect([1.0, 1.0, 7.0], L), [1, 1, 7])


@given(vec(3), vec(3), st.floats(-7, 7))
def test_isometries_preserve_distance(x, y, beta):
    d = np.linalg.norm(x - y)
    assert np.linalg.norm(rotate(x, beta) - rotate(y, beta)) == pytest.approx(d, abs=1e-9)
    L = Hyperplane([0.3, -1.0, 2.0], 0.7)
    assert np.linalg.norm(reflect(x, L) - reflect(y, L)) == pytest.approx(d, abs=1e-9)


@given(vec(3))
def test_reflection_is_an_involution(x):
    L = Hyperplane([1.0, 2.0, -0.5], -1.5)
    np.testing.assert_allclose(reflect(reflect(x, L), L), x, atol=1e-9)


def test_reflection_vectorised():
    X = np.arange(12.0).reshape(4, 3)
    L = Hyperplane([0, 0, 1.0], 1.0)
    Y = reflect(X, L)
    for x, y in zip(X, Y):
        np.testing.assert_allclose(reflect(x, L), y)


def test_angular_hyperplane_contains_ray():
    L = angular_hyperplane(0.7, 3)
    assert abs(L.signed_distance([np.cos(0.7), np.sin(0.7), 4.0])) < 1e-15


def test_bisector_swaps_points():
    a1, a2 = np.array([0.2, -0.3, 0.5]), np.array([-1.0, 0.4, 0.1])
    L = perpendicular_bisector(a1, a2)
    np.testing.assert_allclose(reflect(a1, L), a2, atol=1e-14)


def test_validation():
    with pytest.raises(ValueError):
        as_point([1.0])
    with pytest.raises(ValueError):
        as_point([1.0, np.nan])
    with pytest.raises(ValueError):
        as_point([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        Hyperplane([0.0, 0.0])
    with pytest.raises(ValueError):
        Sphere([0.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        perpendicular_bisector([1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        reflect([1.0, 2.0], Hyperplane([1.0, 0, 0]))
    assert CylCoords(1.0, 0.0, (1.0, 2.0)).dim == 4
