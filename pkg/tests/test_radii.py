import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pharmlab.geometry import Hyperplane
from pharmlab.moebius import MoebiusMap, Scaling, halfspace_map, identity
from pharmlab.radii import (DERIVED, EXACT, ESTIMATE, PExponent, RadiusValue, conformal_transport_r2, mu_inv,
                            mu_p, radius_ball_pn, radius_dihedral_harmonic, radius_halfspace_pn)


def test_mu_examples():
    assert mu_p(1.0, PExponent(3, 3)) == 0.0
    assert mu_p(2.0, PExponent(3, 2)) == pytest.approx(0.5)
    assert mu_inv(0.0, PExponent(4, 4)) == 1.0
    assert mu_inv(0.5, PExponent(3, 2)) == pytest.approx(2.0)


@given(st.floats(0.01, 100), st.sampled_from([(2, 1.5), (3, 2), (3, 3), (3, 4.5), (4, 2.5), (2, 2)]))
def test_mu_round_trip(t, np_):
    pe = PExponent(*np_)
    assert mu_inv(mu_p(t, pe), pe) == pytest.approx(t, rel=1e-12)


@given(st.floats(0.01, 10), st.floats(0.01, 10))
def test_mu_decreasing(s, t):
    for pe in (PExponent(3, 2), PExponent(3, 3), PExponent(2, 4.0)):
        if s < t:
            assert mu_p(s, pe) > mu_p(t, pe)


def test_exponent_validation():
    with pytest.raises(ValueError):
        PExponent(1, 2)
    with pytest.raises(ValueError):
        PExponent(3, 1.0)
    with pytest.raises(ValueError):
        mu_p(0.0, PExponent(3, 2))
    with pytest.raises(ValueError):
        mu_inv(-1.0, PExponent(3, 2))


def test_lambda_and_area():
    pe = PExponent(3, 2)
    assert pe.area == pytest.approx(4 * np.pi)
    assert pe.lambda_n == pytest.approx(4 * np.pi)
    assert PExponent(2, 3).lambda_n == pytest.approx(np.sqrt(2 * np.pi))


def test_halfspace_radius():
    R = radius_halfspace_pn([1.0, 0, 0], Hyperplane([1.0, 0, 0], 0))
    assert R.value == pytest.approx(2.0) and R.kind == EXACT
    L = Hyperplane([1.0, -2.0, 0.5], 0.3)
    a = np.array([2.0, 0.1, -1.0])
    lam = 3.7
    scaled = radius_halfspace_pn(lam * a, Hyperplane(L.normal, lam * L.offset)).value
    assert scaled == pytest.approx(lam * radius_halfspace_pn(a, L).value)
    with pytest.raises(ValueError):
        radius_halfspace_pn([0.0, 0, 0], Hyperplane([1.0, 0, 0], 0))


def test_halfspace_radius_through_the_conformal_route(rng):
    for _ in range(10):
        a = rng.normal(size=4)
        f = halfspace_map(a)
        direct = radius_halfspace_pn(a, Hyperplane(a, 0.0)).value
        assert 1.0 / f.factor(a) == pytest.approx(direct, rel=1e-10)


def test_ball_radius():
    assert radius_ball_pn([0.0, 0, 0]).value == 1.0
    assert radius_ball_pn([0.5, 0, 0]).value == pytest.approx(0.75)
    vals = [radius_ball_pn([s, 0, 0]).value for s in np.linspace(0, 0.999, 20)]
    assert np.all(np.diff(vals) < 0) and vals[-1] < 0.01
    with pytest.raises(ValueError):
        radius_ball_pn([1.0, 0, 0])


def test_dihedral_radius():
    pe = PExponent(3, 2)
    assert radius_dihedral_harmonic(1.0, 1, pe).value == pytest.approx(2.0)
    assert radius_dihedral_harmonic(1.0, 2, pe).value == pytest.approx(1 / (np.sqrt(2) - 0.5))
    assert radius_dihedral_harmonic(2.5, 3, pe).value == pytest.approx(2.5 * radius_dihedral_harmonic(1, 3, pe).value)
    with pytest.raises(ValueError):
        radius_dihedral_harmonic(1.0, 2, PExponent(3, 3))


def test_conformal_transport():
    R = RadiusValue(1.5, ESTIMATE)
    assert conformal_transport_r2(R, identity(3), [0.1, 0, 0]).value == 1.5
    out = conformal_transport_r2(RadiusValue(1.5), MoebiusMap((Scaling(2.0, 3),)), [0.1, 0, 0])
    assert out.value == pytest.approx(3.0) and out.kind == DERIVED


def test_radius_value_validation():
    with pytest.raises(ValueError):
        RadiusValue(0.0)
    with pytest.raises(ValueError):
        RadiusValue(1.0, "guess")
