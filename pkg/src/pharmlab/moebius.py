"""Moebius maps of R^n built from a few primitive stages.

Only compositions of inversions, reflections, rotations, translations and
scalings are supported.  Every stage knows its own inverse, its conformal
factor ``|det Df|^(1/n)`` and how it transforms spheres and hyperplanes, so
maps and their inverses are evaluated without numerical inversion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Hyperplane, Sphere, as_point, check_same_dim, norm, reflect, rotate

POLE_TOL = 1e-12


class PoleError(ValueError):
    """Raised when a map is evaluated at (or within ``POLE_TOL`` of) a pole."""


@dataclass(frozen=True, eq=False)
class SphereOrPlane:
    sphere: Sphere | None = None
    plane: Hyperplane | None = None

    def __post_init__(self):
        if (self.sphere is None) == (self.plane is None):
            raise ValueError("exactly one of sphere/plane must be given")

    @property
    def is_plane(self) -> bool:
        return self.plane is not None

    def residual(self, X) -> np.ndarray:
        """Signed residual: |x-c|^2 - r^2 for spheres, <x,a>-tau for planes."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.plane is not None:
            return X @ self.plane.normal - self.plane.offset
        d = X - self.sphere.center
        return np.einsum("ij,ij->i", d, d) - self.sphere.radius**2

    def side(self, X) -> np.ndarray:
        """+1 outside the sphere / on the positive side of the plane, -1 otherwise."""
        return np.sign(self.residual(X))


# -- stages -----------------------------------------------------------------


class Stage:
    dim: int

    def __call__(self, X):
        raise NotImplementedError

    def factor(self, X) -> np.ndarray:
        raise NotImplementedError

    def inverse(self) -> "Stage":
        raise NotImplementedError

    def image(self, S: SphereOrPlane) -> SphereOrPlane:
        raise NotImplementedError

    def pole(self) -> np.ndarray | None:
        return None


@dataclass(frozen=True, eq=False)
class Inversion(Stage):
    """``x -> a + r2 (x - a) / |x - a|^2`` (``r2`` may be negative)."""

    center: np.ndarray
    r2: float

    def __post_init__(self):
        c = as_point(self.center)
        if self.r2 == 0:
            raise ValueError("inversion needs r2 != 0")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.size

    def _offsets(self, X):
        X = np.asarray(X, dtype=float)
        d = X - self.center
        d2 = np.sum(d * d, axis=-1)
        if np.any(np.sqrt(d2) < POLE_TOL):
            raise PoleError(f"point at the inversion center {self.center}")
        return d, d2

    def __call__(self, X):
        d, d2 = self._offsets(X)
        return self.center + self.r2 * d / d2[..., None] if d.ndim > 1 else self.center + self.r2 * d / d2

    def factor(self, X):
        _, d2 = self._offsets(X)
        return abs(self.r2) / d2

    def inverse(self):
        return self

    def pole(self):
        return self.center

    def image(self, S):
        k, b = self.r2, self.center
        if S.plane is not None:
            a = S.plane.normal / norm(S.plane.normal)
            tau = S.plane.offset / norm(S.plane.normal) - np.dot(a, b)
            if abs(tau) < POLE_TOL:
                return S
            return SphereOrPlane(sphere=Sphere(b + k / (2 * tau) * a, abs(k / (2 * tau))))
        M = S.sphere.center - b
        D = np.dot(M, M) - S.sphere.radius**2
        if abs(D) < POLE_TOL:
            return SphereOrPlane(plane=Hyperplane(M, 0.5 * k + np.dot(b, M)))
        return SphereOrPlane(sphere=Sphere(b + (k / D) * M, abs(k) * S.sphere.radius / abs(D)))


@dataclass(frozen=True, eq=False)
class Reflection(Stage):
    plane: Hyperplane

    @property
    def dim(self):
        return self.plane.dim

    def __call__(self, X):
        return reflect(X, self.plane)

    def factor(self, X):
        return np.ones(np.shape(np.atleast_2d(X))[0]) if np.ndim(X) > 1 else 1.0

    def inverse(self):
        return self

    def image(self, S):
        if S.plane is not None:
            a = S.plane.normal
            shift = self(np.zeros_like(a))
            a2 = self(a) - shift
            return SphereOrPlane(plane=Hyperplane(a2, S.plane.offset + np.dot(a2, shift)))
        return SphereOrPlane(sphere=Sphere(self(S.sphere.center), S.sphere.radius))


@dataclass(frozen=True, eq=False)
class Rotation(Stage):
    """Rotation by ``beta`` in the (x1, x2)-plane."""

    beta: float
    n: int

    @property
    def dim(self):
        return self.n

    def __call__(self, X):
        return rotate(X, self.beta)

    def factor(self, X):
        return np.ones(np.shape(np.atleast_2d(X))[0]) if np.ndim(X) > 1 else 1.0

    def inverse(self):
        return Rotation(-self.beta, self.n)

    def image(self, S):
        if S.plane is not None:
            return SphereOrPlane(plane=Hyperplane(rotate(S.plane.normal, self.beta), S.plane.offset))
        return SphereOrPlane(sphere=Sphere(rotate(S.sphere.center, self.beta), S.sphere.radius))


@dataclass(frozen=True, eq=False)
class Translation(Stage):
    shift: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shift", as_point(self.shift))

    @property
    def dim(self):
        return self.shift.size

    def __call__(self, X):
        return np.asarray(X, dtype=float) + self.shift

    def factor(self, X):
        return np.ones(np.shape(np.atleast_2d(X))[0]) if np.ndim(X) > 1 else 1.0

    def inverse(self):
        return Translation(-self.shift)

    def image(self, S):
        if S.plane is not None:
            a = S.plane.normal
            return SphereOrPlane(plane=Hyperplane(a, S.plane.offset + np.dot(a, self.shift)))
        return SphereOrPlane(sphere=Sphere(S.sphere.center + self.shift, S.sphere.radius))


@dataclass(frozen=True, eq=False)
class Scaling(Stage):
    lam: float
    n: int

    def __post_init__(self):
        if self.lam == 0:
            raise ValueError("scaling factor must be nonzero")

    @property
    def dim(self):
        return self.n

    def __call__(self, X):
        return self.lam * np.asarray(X, dtype=float)

    def factor(self, X):
        f = abs(self.lam)
        return np.full(np.shape(np.atleast_2d(X))[0], f) if np.ndim(X) > 1 else f

    def inverse(self):
        return Scaling(1.0 / self.lam, self.n)

    def image(self, S):
        if S.plane is not None:
            return SphereOrPlane(plane=Hyperplane(S.plane.normal, S.plane.offset * self.lam))
        return SphereOrPlane(sphere=Sphere(self.lam * S.sphere.center, abs(self.lam) * S.sphere.radius))


# -- compositions -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MoebiusMap:
    """Composition of stages, applied first to last."""

    stages: tuple = field(default_factory=tuple)
    n: int = 0

    def __post_init__(self):
        stages = tuple(self.stages)
        dims = {s.dim for s in stages}
        if len(dims) > 1:
            raise ValueError("stages disagree on dimension")
        object.__setattr__(self, "stages", stages)
        if dims:
            object.__setattr__(self, "n", dims.pop())

    def __call__(self, X):
        Y = np.asarray(X, dtype=float)
        for s in self.stages:
            Y = s(Y)
        return Y

    def factor(self, X):
        """Conformal factor ``|det Df(x)|^(1/n)``, multiplied stage by stage."""
        Y = np.asarray(X, dtype=float)
        f = np.ones(Y.shape[0]) if Y.ndim > 1 else 1.0
        for s in self.stages:
            f = f * s.factor(Y)
            Y = s(Y)
        return f

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(tuple(s.inverse() for s in reversed(self.stages)), self.n)

    def then(self, other: "MoebiusMap") -> "MoebiusMap":
        return MoebiusMap(self.stages + other.stages, self.n or other.n)

    def image(self, S: SphereOrPlane) -> SphereOrPlane:
        for s in self.stages:
            S = s.image(S)
        return S

    def poles(self) -> list[np.ndarray]:
        """Points sent to infinity, expressed in the domain of the whole map."""
        out = []
        for i, s in enumerate(self.stages):
            p = s.pole()
            if p is not None:
                out.append(MoebiusMap(self.stages[:i], self.n).inverse()(p) if i else p)
        return out


def identity(n: int) -> MoebiusMap:
    return MoebiusMap((), n)


def conformal_factor(f: MoebiusMap, x) -> float:
    return float(f.factor(as_point(x, f.n or None)))


def jacobian_fd(f, x, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian, used as an independent oracle."""
    x = as_point(x)
    n = x.size
    J = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        J[:, i] = (f(x + e) - f(x - e)) / (2 * step)
    return J


def halfspace_map(a) -> MoebiusMap:
    """``f(x) = -a/|a| + 2|a|(x + a)/|x + a|^2``: sends ``a`` to 0 and
    ``L(a, 0)`` onto the unit sphere."""
    a = as_point(a)
    s = norm(a)
    if s == 0.0:
        raise ValueError("a must be nonzero")
    n = a.size
    return MoebiusMap((Translation(a), Inversion(np.zeros(n), 2 * s), Translation(-a / s)), n)


def _check_in_ball(*pts):
    for p in pts:
        if norm(p) >= 1.0:
            raise ValueError(f"point {p} is not inside the open unit ball")


@dataclass(frozen=True, eq=False)
class PsiMap:
    """The map psi_{a1,a2} = f2 o f1 together with its ingredients."""

    f1: MoebiusMap
    f2: MoebiusMap
    a1: np.ndarray
    a2: np.ndarray
    degenerate_f2: bool  # f1(a2) == 0; f2 taken as the identity by convention

    @property
    def map(self) -> MoebiusMap:
        return self.f1.then(self.f2)

    @property
    def c(self) -> np.ndarray:
        return self.map(self.a1)

    def __call__(self, X):
        return self.map(X)

    def factor(self, X):
        return self.map.factor(X)

    def inverse(self) -> MoebiusMap:
        return self.map.inverse()


def build_psi(a1, a2) -> PsiMap:
    a1, a2 = as_point(a1), as_point(a2)
    n = check_same_dim(a1, a2)
    _check_in_ball(a1, a2)
    if norm(a1 - a2) < POLE_TOL:
        raise ValueError("a1 and a2 must be distinct")
    if norm(a1) == 0.0:
        f1 = identity(n)
    else:
        a = a1 / np.dot(a1, a1)
        f1 = MoebiusMap((Inversion(a, np.dot(a, a) - 1.0),), n)
    y = f1(a2)
    y2 = np.dot(y, y)
    if np.sqrt(y2) < POLE_TOL:
        return PsiMap(f1, identity(n), a1, a2, True)
    b = (1.0 + np.sqrt(1.0 - y2)) / y2 * y
    f2 = MoebiusMap((Inversion(b, np.dot(b, b) - 1.0),), n)
    return PsiMap(f1, f2, a1, a2, False)


def separating_hypersphere(a1, a2) -> SphereOrPlane:
    """``C(a1, a2)``: the preimage under psi of the hyperplane ``<c, x> = 0``."""
    psi = build_psi(a1, a2)
    c = psi.c
    if norm(c) < POLE_TOL:
        raise ValueError("psi(a1) is the origin; the separating plane is undefined")
    return psi.inverse().image(SphereOrPlane(plane=Hyperplane(c, 0.0)))


def fit_sphere(X) -> SphereOrPlane:
    """Least-squares sphere (or plane, if flat) through points ``X``.

    Fits ``w0 |x|^2 - 2 <m, x> - k = 0`` as a homogeneous problem, so that a
    plane is just the case ``w0 = 0``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    H = np.hstack([np.sum(X * X, axis=1)[:, None], -2 * X, -np.ones((len(X), 1))])
    w = np.linalg.svd(H)[2][-1]
    w0, m, k = w[0], w[1:-1], w[-1]
    if abs(w0) < 1e-9 * np.max(np.abs(w)):
        return SphereOrPlane(plane=Hyperplane(m, -0.5 * k))
    m, k = m / w0, k / w0
    return SphereOrPlane(sphere=Sphere(m, np.sqrt(max(np.dot(m, m) + k, 1e-300))))
