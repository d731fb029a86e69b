import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pharmlab.geometry import Hyperplane, Sphere
from pharmlab.moebius import (Inversion, MoebiusMap, PoleError, Reflection, Rotation, Scaling, SphereOrPlane,
                              Translation, build_psi, conformal_factor, fit_sphere, halfspace_map, identity,
                              jacobian_fd, separating_hypersphere)


def in_ball(rng, count, n, rmax=0.95):
    X = rng.normal(size=(count, n))
    X /= np.linalg.norm(X, axis=1)[:, None]
    return X * (rmax * rng.uniform(0, 1, count) ** (1 / n))[:, None]


def test_halfspace_map_examples(rng):
    a = np.array([1.0, 0, 0])
    f = halfspace_map(a)
    np.testing.assert_allclose(f(a), 0, atol=1e-15)
    np.testing.assert_allclose(f(np.array([0.0, 1, 0])), [0, 1, 0], atol=1e-15)
    a = np.array([0.3, -1.2, 0.5, 2.0])
    f = halfspace_map(a)
    X = rng.normal(size=(200, 4))
    X -= np.outer(X @ a / (a @ a), a)
    np.testing.assert_allclose(np.linalg.norm(f(X), axis=1), 1.0, atol=1e-10)
    # the half-space containing a goes into the ball
    assert np.all(np.linalg.norm(f(X + 0.3 * a), axis=1) < 1)


def test_conformal_factor_examples(rng):
    inv = MoebiusMap((Inversion(np.zeros(3), 1.0),))
    assert conformal_factor(inv, [2.0, 0, 0]) == pytest.approx(0.25)
    for stage in (Reflection(Hyperplane([1.0, 2, 0], 1.0)), Rotation(0.7, 3), Translation(np.array([1.0, 2, 3]))):
        assert conformal_factor(MoebiusMap((stage,)), rng.normal(size=3)) == pytest.approx(1.0)
    assert conformal_factor(MoebiusMap((Scaling(-2.5, 3),)), [1.0, 1, 1]) == pytest.approx(2.5)


def test_factor_matches_finite_difference_jacobian(rng):
    f = build_psi(np.array([0.3, 0.2, -0.1]), np.array([-0.5, 0.1, 0.4])).map
    g = halfspace_map(np.array([0.5, -1.0, 2.0]))
    for m in (f, g):
        for x in in_ball(rng, 20, 3, 0.9):
            J = jacobian_fd(m, x)
            ref = abs(np.linalg.det(J)) ** (1 / 3)
            assert conformal_factor(m, x) == pytest.approx(ref, rel=1e-6)
            # conformal: J / factor is orthogonal
            Q = J / ref
            np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-6)


def test_inverse_round_trip(rng):
    f = build_psi(np.array([0.1, 0.6, 0.0, 0.2]), np.array([-0.3, 0.0, 0.5, 0.1])).map
    X = in_ball(rng, 100, 4)
    np.testing.assert_allclose(f.inverse()(f(X)), X, atol=1e-10)


def test_pole_is_rejected():
    f = MoebiusMap((Inversion(np.array([1.0, 0]), 1.0),))
    with pytest.raises(PoleError):
        f(np.array([1.0, 0]))
    assert len(f.poles()) == 1


def test_images_of_spheres_are_spheres(rng):
    f = build_psi(np.array([0.4, 0.1, -0.2]), np.array([0.0, -0.5, 0.3])).map
    for _ in range(5):
        c, r = rng.normal(size=3) * 0.3, rng.uniform(0.1, 0.5)
        U = rng.normal(size=(12, 3))
        P = c + r * U / np.linalg.norm(U, axis=1)[:, None]
        img = f.image(SphereOrPlane(sphere=Sphere(c, r)))
        np.testing.assert_allclose(img.residual(f(P)), 0, atol=1e-8)
        fit = fit_sphere(f(P))
        np.testing.assert_allclose(fit.residual(f(P)), 0, atol=1e-8)


def test_psi_rejects_bad_points():
    with pytest.raises(ValueError):
        build_psi([0.0, 0, 0], [0.0, 0, 0])
    with pytest.raises(ValueError):
        build_psi([1.0, 0, 0], [0.2, 0, 0])


def test_psi_origin_case():
    psi = build_psi([0.0, 0, 0], [0.4, 0, 0])
    y1, y2 = psi(np.zeros(3)), psi(np.array([0.4, 0, 0]))
    np.testing.assert_allclose(y1, -y2, atol=1e-12)
    np.testing.assert_allclose(y1[1:], 0, atol=1e-15)


def test_first_stage_centres_a1(rng):
    for _ in range(10):
        a1, a2 = in_ball(rng, 2, 3)
        psi = build_psi(a1, a2)
        np.testing.assert_allclose(psi.f1(a1), 0, atol=1e-12)
        assert not psi.degenerate_f2


def test_psi_figure_configuration():
    a1, a2 = np.array([0.5, 0, 0, 0]), np.array([1 / 3, 0, 0, 0])
    psi = build_psi(a1, a2)
    np.testing.assert_allclose(psi(a1) + psi(a2), 0, atol=1e-10)


def test_psi_preserves_the_ball(rng):
    psi = build_psi(np.array([0.2, -0.4, 0.1]), np.array([0.6, 0.3, -0.2]))
    X = in_ball(rng, 1000, 3, 0.999)
    assert np.all(np.linalg.norm(psi(X), axis=1) < 1)
    U = rng.normal(size=(500, 3))
    U /= np.linalg.norm(U, axis=1)[:, None]
    np.testing.assert_allclose(np.linalg.norm(psi(U), axis=1), 1, atol=1e-10)


def test_separating_sphere_symmetric_pair():
    a1 = np.array([0.3, 0.4, 0.0])
    C = separating_hypersphere(a1, -a1)
    assert C.is_plane
    np.testing.assert_allclose(np.cross(C.plane.normal, a1), 0, atol=1e-12)
    assert abs(C.plane.offset) < 1e-12


@given(st.floats(0.05, 0.9), st.floats(0.05, 0.9))
def test_separating_sphere_on_a_ray(s1, s2):
    if abs(s1 - s2) < 1e-3:
        return
    u = np.array([1.0, 2.0, -1.0]) / np.sqrt(6)
    C = separating_hypersphere(s1 * u, s2 * u)
    assert not C.is_plane
    c, r = C.sphere.center, C.sphere.radius
    np.testing.assert_allclose(np.cross(c, u), 0, atol=1e-9)
    assert c @ c - r * r == pytest.approx(1.0, abs=1e-9)
    assert C.side(s1 * u)[0] * C.side(s2 * u)[0] == -1


def test_identity_map():
    f = identity(3)
    x = np.array([1.0, 2, 3])
    np.testing.assert_allclose(f(x), x)
    assert conformal_factor(f, x) == 1.0
