"""Constructive solid geometry for open subsets of R^n.

Every domain exposes a vectorised membership predicate ``contains(X)`` for an
``(N, n)`` array (or a single point), an optional bounding box, and a JSON
round trip used by the CLI configs and reports.  All primitives are open sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import TWO_PI, Hyperplane, Sphere, as_point, cylindrical_arrays
from .moebius import MoebiusMap, SphereOrPlane


def _rows(X, n: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != n:
        raise ValueError(f"dimension mismatch: domain has n={n}, points have {X.shape[1]}")
    return X, single


class Domain:
    n: int

    def _contains(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, X):
        X, single = _rows(X, self.n)
        out = self._contains(X)
        return bool(out[0]) if single else out

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        inf = np.full(self.n, np.inf)
        return -inf, inf

    def is_bounded(self) -> bool:
        lo, hi = self.bounds()
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    def to_dict(self) -> dict:
        raise TypeError(f"{type(self).__name__} is not serialisable")

    def __and__(self, other):
        return Intersection((self, other))

    def __or__(self, other):
        return Union((self, other))

    def __invert__(self):
        return Complement(self)


@dataclass(frozen=True, eq=False)
class Everything(Domain):
    n: int

    def _contains(self, X):
        return np.ones(len(X), dtype=bool)

    def to_dict(self):
        return {"type": "all", "n": self.n}


@dataclass(frozen=True, eq=False)
class HalfSpace(Domain):
    """``{x : <x, normal> > offset}``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "normal", as_point(self.normal))
        if not np.any(self.normal):
            raise ValueError("normal must be nonzero")

    @property
    def n(self):
        return self.normal.size

    @property
    def plane(self) -> Hyperplane:
        return Hyperplane(self.normal, self.offset)

    def _contains(self, X):
        return X @ self.normal > self.offset

    def to_dict(self):
        return {"type": "halfspace", "normal": self.normal.tolist(), "offset": float(self.offset)}


@dataclass(frozen=True, eq=False)
class Ball(Domain):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def n(self):
        return self.center.size

    def _contains(self, X):
        d = X - self.center
        return np.einsum("ij,ij->i", d, d) < self.radius**2

    def bounds(self):
        return self.center - self.radius, self.center + self.radius

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class Ring(Domain):
    """``K(r1, r2) = {r1 < |x - center| < r2}``; ``r2`` may be infinite."""

    r1: float
    r2: float
    n_: int = field(default=3, repr=False)
    center: np.ndarray | None = None

    def __post_init__(self):
        if not 0 <= self.r1 < self.r2:
            raise ValueError("need 0 <= r1 < r2")
        c = np.zeros(self.n_) if self.center is None else as_point(self.center, self.n_)
        object.__setattr__(self, "center", c)

    @property
    def n(self):
        return self.n_

    def _contains(self, X):
        r = np.linalg.norm(X - self.center, axis=1)
        return (r > self.r1) & (r < self.r2)

    def bounds(self):
        return self.center - self.r2, self.center + self.r2

    def to_dict(self):
        return {"type": "ring", "r1": self.r1, "r2": _enc(self.r2), "n": self.n_,
                "center": self.center.tolist()}


@dataclass(frozen=True, eq=False)
class Cylinder(Domain):
    """``Z(rho1, rho2) = {rho1 < rho < rho2}`` in cylindrical coordinates."""

    rho1: float
    rho2: float
    n_: int = 3

    def __post_init__(self):
        if not 0 <= self.rho1 < self.rho2:
            raise ValueError("need 0 <= rho1 < rho2")

    @property
    def n(self):
        return self.n_

    def _contains(self, X):
        rho = np.hypot(X[:, 0], X[:, 1])
        return (rho > self.rho1) & (rho < self.rho2)

    def bounds(self):
        lo, hi = np.full(self.n_, -np.inf), np.full(self.n_, np.inf)
        lo[:2], hi[:2] = -self.rho2, self.rho2
        return lo, hi

    def to_dict(self):
        return {"type": "cylinder", "rho1": self.rho1, "rho2": _enc(self.rho2), "n": self.n_}


@dataclass(frozen=True, eq=False)
class Sector(Domain):
    """Open angular sector ``{theta1 < theta < theta2}`` (mod 2 pi), axis excluded."""

    theta1: float
    theta2: float
    n_: int = 3

    def __post_init__(self):
        if not 0 < self.theta2 - self.theta1 <= TWO_PI + 1e-15:
            raise ValueError("need 0 < theta2 - theta1 <= 2 pi")

    @property
    def n(self):
        return self.n_

    @property
    def width(self) -> float:
        return self.theta2 - self.theta1

    def _contains(self, X):
        rho, theta = cylindrical_arrays(X)
        rel = np.mod(theta - self.theta1, TWO_PI)
        return (rho > 0) & (rel > 0) & (rel < self.width)

    def to_dict(self):
        return {"type": "sector", "theta1": self.theta1, "theta2": self.theta2, "n": self.n_}


@dataclass(frozen=True, eq=False)
class Side(Domain):
    """One side of a sphere or hyperplane: ``sign * residual(x) > 0``."""

    surface: SphereOrPlane
    sign: int = -1

    @property
    def n(self):
        s = self.surface
        return s.plane.dim if s.is_plane else s.sphere.dim

    def _contains(self, X):
        return self.sign * self.surface.residual(X) > 0

    def bounds(self):
        if not self.surface.is_plane and self.sign < 0:
            s = self.surface.sphere
            return s.center - s.radius, s.center + s.radius
        return super().bounds()

    def to_dict(self):
        s = self.surface
        surf = ({"plane": {"normal": s.plane.normal.tolist(), "offset": s.plane.offset}} if s.is_plane
                else {"sphere": {"center": s.sphere.center.tolist(), "radius": s.sphere.radius}})
        return {"type": "side", "surface": surf, "sign": int(self.sign)}


@dataclass(frozen=True, eq=False)
class Implicit(Domain):
    """``{x : fn(x) > 0}`` for a vectorised ``fn``."""

    fn: Callable[[np.ndarray], np.ndarray]
    n_: int
    name: str = "implicit"
    spec: dict | None = None
    box: tuple | None = None

    @property
    def n(self):
        return self.n_

    def _contains(self, X):
        with np.errstate(all="ignore"):
            v = self.fn(X)
        return np.nan_to_num(v, nan=-1.0) > 0

    def bounds(self):
        if self.box is not None:
            return np.asarray(self.box[0], float), np.asarray(self.box[1], float)
        return super().bounds()

    def to_dict(self):
        if self.spec is None:
            return super().to_dict()
        return dict(self.spec)


@dataclass(frozen=True, eq=False)
class MoebiusImage(Domain):
    """``f(D) = {x : f^{-1}(x) in D}``; points sent to a pole are excluded."""

    base: Domain
    f: MoebiusMap

    @property
    def n(self):
        return self.base.n

    def _contains(self, X):
        g = self.f.inverse()
        out = np.zeros(len(X), dtype=bool)
        ok = np.ones(len(X), dtype=bool)
        for pole in g.poles():
            ok &= np.linalg.norm(X - pole, axis=1) > 1e-12
        if ok.any():
            out[ok] = self.base.contains(g(X[ok]))
        return out


@dataclass(frozen=True, eq=False)
class Intersection(Domain):
    parts: tuple

    def __post_init__(self):
        parts = []
        for d in self.parts:
            parts.extend(d.parts if isinstance(d, Intersection) else (d,))
        if len({d.n for d in parts}) != 1:
            raise ValueError("parts disagree on dimension")
        object.__setattr__(self, "parts", tuple(parts))

    @property
    def n(self):
        return self.parts[0].n

    def _contains(self, X):
        out = np.ones(len(X), dtype=bool)
        for d in self.parts:
            if out.any():
                out[out] = d._contains(X[out])
        return out

    def bounds(self):
        los, his = zip(*(d.bounds() for d in self.parts))
        return np.max(los, axis=0), np.min(his, axis=0)

    def to_dict(self):
        return {"type": "intersection", "parts": [d.to_dict() for d in self.parts]}


@dataclass(frozen=True, eq=False)
class Union(Domain):
    parts: tuple

    @property
    def n(self):
        return self.parts[0].n

    def _contains(self, X):
        out = np.zeros(len(X), dtype=bool)
        for d in self.parts:
            rest = ~out
            if rest.any():
                out[rest] = d._contains(X[rest])
        return out

    def bounds(self):
        los, his = zip(*(d.bounds() for d in self.parts))
        return np.min(los, axis=0), np.max(his, axis=0)

    def to_dict(self):
        return {"type": "union", "parts": [d.to_dict() for d in self.parts]}


@dataclass(frozen=True, eq=False)
class Complement(Domain):
    """Complement of the closure is not computable in general; this is the
    plain set complement, so boundaries of the base belong to it."""

    base: Domain

    @property
    def n(self):
        return self.base.n

    def _contains(self, X):
        return ~self.base._contains(X)

    def to_dict(self):
        return {"type": "complement", "base": self.base.to_dict()}


@dataclass(frozen=True, eq=False)
class Rotated(Domain):
    """``base`` rotated by ``beta`` in the ``(x1, x2)`` plane."""

    base: Domain
    beta: float

    @property
    def n(self):
        return self.base.n

    def _contains(self, X):
        c, s = np.cos(self.beta), np.sin(self.beta)
        Y = X.copy()
        Y[:, 0], Y[:, 1] = c * X[:, 0] + s * X[:, 1], -s * X[:, 0] + c * X[:, 1]
        return self.base.contains(Y)

    def bounds(self):
        lo, hi = self.base.bounds()
        r = np.max(np.abs(np.concatenate([lo[:2], hi[:2]])))
        lo, hi = lo.copy(), hi.copy()
        lo[:2], hi[:2] = -r, r
        return lo, hi

    def to_dict(self):
        return {"type": "rotated", "beta": float(self.beta), "base": self.base.to_dict()}


def _enc(v: float):
    return "inf" if np.isinf(v) else float(v)


def _dec(v) -> float:
    return np.inf if v in ("inf", "Infinity") else float(v)


# -- named implicit regions ---------------------------------------------------


def dp_expression(X, a1, a2) -> np.ndarray:
    """``sum_k (-1)^(k+1) (|x-a_k|^(2-n) - ||a_k| x - a_k/|a_k||^(2-n))`` for l = 1.

    Positive inside the first extremal domain, negative inside the second.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    total = np.zeros(len(X))
    for sign, a in ((1.0, np.asarray(a1, float)), (-1.0, np.asarray(a2, float))):
        s = np.linalg.norm(a)
        d1 = np.linalg.norm(X - a, axis=1)
        d2 = np.linalg.norm(s * X - a / s, axis=1)
        with np.errstate(divide="ignore"):
            total += sign * (d1 ** (2 - n) - d2 ** (2 - n))
    return total


def dp_domain(a1, a2, l: int) -> Implicit:
    a1, a2 = as_point(a1), as_point(a2)
    if np.linalg.norm(a1) == 0 or np.linalg.norm(a2) == 0:
        raise ValueError("the implicit domains need a1, a2 != 0")
    if np.linalg.norm(a1) >= 1 or np.linalg.norm(a2) >= 1:
        raise ValueError("points must lie in the open unit ball")
    n = a1.size
    if n < 3:
        raise ValueError("the implicit domains need n >= 3")
    sign = 1.0 if l == 1 else -1.0
    ball = Ball(np.zeros(n), 1.0)

    def fn(X):
        v = sign * dp_expression(X, a1, a2)
        return np.where(ball._contains(X), v, -1.0)

    spec = {"type": "dp", "a1": a1.tolist(), "a2": a2.tolist(), "l": int(l)}
    return Implicit(fn, n, f"D{l}", spec, (-np.ones(n), np.ones(n)))


def from_dict(d: dict) -> Domain:
    """Inverse of ``Domain.to_dict``."""
    t = d["type"]
    if t == "all":
        return Everything(int(d["n"]))
    if t == "halfspace":
        return HalfSpace(np.asarray(d["normal"], float), float(d.get("offset", 0.0)))
    if t == "ball":
        return Ball(np.asarray(d["center"], float), float(d["radius"]))
    if t == "ring":
        n = int(d.get("n", 3))
        return Ring(float(d["r1"]), _dec(d["r2"]), n, np.asarray(d.get("center", np.zeros(n)), float))
    if t == "cylinder":
        return Cylinder(float(d["rho1"]), _dec(d["rho2"]), int(d.get("n", 3)))
    if t == "sector":
        return Sector(float(d["theta1"]), float(d["theta2"]), int(d.get("n", 3)))
    if t == "side":
        s = d["surface"]
        if "plane" in s:
            surf = SphereOrPlane(plane=Hyperplane(np.asarray(s["plane"]["normal"], float), s["plane"]["offset"]))
        else:
            surf = SphereOrPlane(sphere=Sphere(np.asarray(s["sphere"]["center"], float), s["sphere"]["radius"]))
        return Side(surf, int(d.get("sign", -1)))
    if t == "dp":
        return dp_domain(d["a1"], d["a2"], int(d["l"]))
    if t == "intersection":
        return Intersection(tuple(from_dict(p) for p in d["parts"]))
    if t == "union":
        return Union(tuple(from_dict(p) for p in d["parts"]))
    if t == "rotated":
        return Rotated(from_dict(d["base"]), float(d["beta"]))
    if t == "complement":
        return Complement(from_dict(d["base"]))
    raise ValueError(f"unknown domain type {t!r}")
