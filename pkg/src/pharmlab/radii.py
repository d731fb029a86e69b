"""The mu_p scale and the closed-form radii.

``mu_p(t) = -log t`` when ``p = n`` and ``t**(-gamma) / gamma`` otherwise, with
``gamma = (n - p) / (p - 1)``.  The p-harmonic radius ``R`` of a domain at a
point is the number with ``-mu_p(R)`` equal to the limit of the regular part
of the Green function at its pole.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .geometry import Hyperplane, as_point, check_same_dim, norm, reflect
from .moebius import MoebiusMap

EXACT = "exact-closed-form"
DERIVED = "derived-closed-form"
ESTIMATE = "numeric-estimate"


@dataclass(frozen=True)
class PExponent:
    n: int
    p: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", float(self.p))

    @property
    def conformal(self) -> bool:
        """True for the logarithmic case ``p = n``."""
        return self.p == self.n

    @property
    def gamma(self) -> float:
        return (self.n - self.p) / (self.p - 1)

    @cached_property
    def omega_n(self) -> float:
        """Volume of the unit n-ball, pi^(n/2) / Gamma(n/2 + 1)."""
        n = self.n
        return float(np.exp(0.5 * n * np.log(np.pi) - gammaln(0.5 * n + 1)))

    @property
    def area(self) -> float:
        """n * omega_n, the area of the unit sphere."""
        return self.n * self.omega_n

    @property
    def lambda_n(self) -> float:
        return self.area ** (1.0 / (self.p - 1))


def mu_p(t, pe: PExponent):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("mu_p needs t > 0")
    if pe.conformal:
        out = -np.log(t)
    else:
        g = pe.gamma
        out = t ** (-g) / g
    return float(out) if out.ndim == 0 else out


def mu_inv(s, pe: PExponent):
    """Inverse of :func:`mu_p`."""
    s = np.asarray(s, dtype=float)
    if pe.conformal:
        out = np.exp(-s)
    else:
        g = pe.gamma
        if np.any(g * s <= 0):
            raise ValueError(f"value {s} is outside the range of mu_p (gamma={g})")
        out = (g * s) ** (-1.0 / g)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RadiusValue:
    value: float
    kind: str = EXACT

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value > 0):
            raise ValueError(f"radius must be finite and positive, got {self.value}")
        if self.kind not in (EXACT, DERIVED, ESTIMATE):
            raise ValueError(f"unknown radius kind {self.kind!r}")


def radius_halfspace_pn(a, L: Hyperplane) -> RadiusValue:
    """n-harmonic radius of the half-space bounded by ``L`` that contains ``a``."""
    a = as_point(a)
    check_same_dim(a, L.normal)
    d = abs(float(L.signed_distance(a)))
    if d == 0.0:
        raise ValueError("point lies on the boundary hyperplane")
    return RadiusValue(norm(a - reflect(a, L)), EXACT)


def radius_ball_pn(a) -> RadiusValue:
    """n-harmonic radius of the unit ball at ``a``: ``1 - |a|^2``."""
    a = as_point(a)
    r2 = float(np.dot(a, a))
    if r2 >= 1.0:
        raise ValueError("point must lie in the open unit ball")
    return RadiusValue(1.0 - r2, DERIVED)


def radius_dihedral_harmonic(t: float, k: int, pe: PExponent) -> RadiusValue:
    """Harmonic radius of ``{|theta| < pi/(2k)}`` at ``[t, 0, 0]`` by images."""
    if pe.p != 2 or pe.n < 3:
        raise ValueError("the dihedral formula needs p = 2 and n >= 3")
    if not t > 0 or k < 1:
        raise ValueError("need t > 0 and k >= 1")
    n = pe.n
    x0 = np.zeros(n)
    x0[0] = t
    total = 0.0
    for l in range(1, 2 * k):
        xl = np.zeros(n)
        xl[0], xl[1] = t * np.cos(np.pi * l / k), t * np.sin(np.pi * l / k)
        total += (-1) ** (l - 1) * norm(x0 - xl) ** (2 - n)
    return RadiusValue(total ** (1.0 / (2 - n)), DERIVED)


def conformal_transport_r2(R: RadiusValue, f: MoebiusMap, x0) -> RadiusValue:
    """Radius of the image domain at ``f(x0)``: ``|f'(x0)| R``."""
    return RadiusValue(float(f.factor(as_point(x0))) * R.value, R.kind if R.kind != EXACT else DERIVED)
