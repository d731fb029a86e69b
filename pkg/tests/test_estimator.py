import numpy as np
import pytest

from pharmlab.domains import Ball, HalfSpace, Intersection, Ring
from pharmlab.estimator import (UnderResolvedError, axis_hints, axisymmetric_axis, boundary_distance,
                                estimate_radius_modulus, estimate_radius_pde)
from pharmlab.radii import PExponent


def covers(est, exact, slack=0.0):
    lo, hi = est.interval
    return lo - slack <= exact <= hi + slack


def test_boundary_distance():
    d, v = boundary_distance(Ball(np.zeros(3), 1.0), [0.0, 0.0, 0.4])
    # sampled directions: an upper bound, tight to the direction spacing
    assert 0.6 - 1e-9 <= d <= 0.6 + 1e-3
    np.testing.assert_allclose(v, [0, 0, 1], atol=0.1)
    d, _ = boundary_distance(HalfSpace([0, 1.0], 0.0), [3.0, 0.25])
    assert 0.25 - 1e-9 <= d <= 0.25 + 1e-3
    with pytest.raises(ValueError):
        boundary_distance(Ball(np.zeros(2), 1.0), [2.0, 0.0])


def test_axis_detection():
    D = Intersection((Ball(np.zeros(3), 1.0), HalfSpace([0, 0, 1.0], -0.5)))
    a = np.array([0, 0, 0.1])
    hints = axis_hints(D, a)
    assert any(abs(abs(h @ [0, 0, 1]) - np.linalg.norm(h)) < 1e-12 for h in hints)
    ax = axisymmetric_axis(D, a, 0.5, hints)
    np.testing.assert_allclose(abs(ax), [0, 0, 1], atol=1e-12)
    off = Intersection((Ball([0.3, 0, 0], 1.0), HalfSpace([0, 0, 1.0], -0.5)))
    assert axisymmetric_axis(off, a, 0.5, axis_hints(off, a)) is None


def test_ball_centre_harmonic():
    est = estimate_radius_modulus(Ball(np.zeros(3), 1.0), np.zeros(3), PExponent(3, 2), 1 / 16)
    assert est.value == pytest.approx(1.0, rel=1e-6)
    assert est.info["grid"] == "meridian"


def test_planar_ball_off_centre():
    a = np.array([0.3, 0.2])
    est = estimate_radius_modulus(Ball(np.zeros(2), 1.0), a, PExponent(2, 2), 1 / 16)
    assert covers(est, 1 - a @ a)
    assert est.error < 0.01


def test_planar_ball_other_exponent():
    # the centre of a ball is a symmetry point, so R = 1 for every p
    est = estimate_radius_modulus(Ball(np.zeros(2), 1.0), np.zeros(2), PExponent(2, 1.5), 1 / 16, levels=4)
    assert est.value == pytest.approx(1.0, rel=1e-4)


def test_dilation_and_translation():
    pe = PExponent(3, 2)
    base = estimate_radius_modulus(Ball(np.zeros(3), 1.0), np.zeros(3), pe, 1 / 16, error_check=False).value
    c = np.array([1.0, -2.0, 0.5])
    big = estimate_radius_modulus(Ball(c, 2.0), c, pe, 1 / 8, error_check=False).value
    assert big == pytest.approx(2 * base, rel=1e-6)


@pytest.mark.slow
def test_halfspace_conformal_exponent():
    est = estimate_radius_modulus(HalfSpace([0, 0, 1.0], 0.0), [0, 0, 1.0], PExponent(3, 3), 1 / 8)
    assert est.value == pytest.approx(2.0, rel=0.03)
    assert covers(est, 2.0)
    assert est.info["grid"] == "meridian-fe"
    assert "truncation_error" in est.info


def test_pde_ball():
    a = np.array([0.2, 0.1, 0.0])
    est = estimate_radius_pde(Ball(np.zeros(3), 1.0), a, 3, 1 / 16)
    assert est.value == pytest.approx(1 - a @ a, abs=1e-4)
    assert covers(est, 1 - a @ a, slack=1e-6)
    assert {"raw_value", "coarse_value", "residual"} <= set(est.info)


def test_pde_and_modulus_routes_agree_on_a_shell():
    D, a = Ring(0.5, 2.0, 3), np.array([1.2, 0.0, 0.0])
    pde = estimate_radius_pde(D, a, 3, 1 / 16)
    mod = estimate_radius_modulus(D, a, PExponent(3, 2), 1 / 16)
    # monotone in the domain: B(a, 0.7) inside D inside B(a, 3.2)
    assert 0.7 <= pde.value <= 3.2
    assert abs(pde.value - mod.value) <= 2 * (pde.error + mod.error) + 1e-3


def test_under_resolved_and_bad_input():
    with pytest.raises(UnderResolvedError):
        estimate_radius_modulus(Ball(np.zeros(2), 1.0), [0.9, 0.0], PExponent(2, 2), 0.25, kind="cartesian")
    with pytest.raises(ValueError):
        estimate_radius_pde(Ball(np.zeros(2), 1.0), np.zeros(2), 2, 0.1)
    with pytest.raises(ValueError):
        estimate_radius_pde(Ball(np.zeros(3), 1.0), [2.0, 0, 0], 3, 0.1)
    with pytest.raises(ValueError):
        estimate_radius_modulus(Ball(np.zeros(2), 1.0), np.zeros(2), PExponent(3, 2), 0.1)


def test_estimate_serialises():
    est = estimate_radius_modulus(Ball(np.zeros(2), 1.0), np.zeros(2), PExponent(2, 2), 1 / 8, error_check=False)
    d = est.to_dict()
    assert d["method"] == "modulus" and len(d["t_sequence"]) == len(d["phi_values"])
    assert est.as_radius().value == est.value
