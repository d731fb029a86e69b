"""Vectors, cylindrical coordinates, reflections and rotations in R^n.

Points are plain ``numpy`` arrays of shape ``(n,)`` (or ``(N, n)`` for the
vectorised helpers).  Cylindrical coordinates follow the convention
``x1 = rho cos(theta)``, ``x2 = rho sin(theta)``, ``x' = (x3, ..., xn)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


def as_point(x, n: int | None = None) -> np.ndarray:
    """Validate and return ``x`` as a float vector of dimension ``n >= 2``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"a point must be a 1-d vector, got shape {arr.shape}")
    if arr.size < 2:
        raise ValueError("dimension must be at least 2")
    if n is not None and arr.size != n:
        raise ValueError(f"dimension mismatch: expected {n}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def check_same_dim(*points: np.ndarray) -> int:
    dims = {np.shape(p)[-1] for p in points}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def norm(x) -> float:
    return float(np.sqrt(np.dot(x, x)))


@dataclass(frozen=True)
class CylCoords:
    rho: float
    theta: float
    xprime: tuple[float, ...]

    @property
    def dim(self) -> int:
        return 2 + len(self.xprime)


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """``L(a, tau) = {x : <x, a> = tau}``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        a = as_point(self.normal)
        if norm(a) == 0.0:
            raise ValueError("hyperplane normal must be nonzero")
        a.setflags(write=False)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return self.normal.size

    def signed_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x @ self.normal - self.offset) / norm(self.normal)

    def unit(self) -> "Hyperplane":
        s = norm(self.normal)
        return Hyperplane(self.normal / s, self.offset / s)


@dataclass(frozen=True, eq=False)
class Sphere:
    """``S(a, r)``; the same value doubles as the ball ``B(a, r)``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = as_point(self.center)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size


def to_cylindrical(x) -> CylCoords:
    x = as_point(x)
    rho = float(np.hypot(x[0], x[1]))
    theta = 0.0 if rho == 0.0 else float(np.arctan2(x[1], x[0]) % TWO_PI)
    if theta >= TWO_PI:  # arctan2 % 2pi can round up to exactly 2pi
        theta = 0.0
    return CylCoords(rho, theta, tuple(float(v) for v in x[2:]))


def from_cylindrical(c: CylCoords) -> np.ndarray:
    return np.array([c.rho * np.cos(c.theta), c.rho * np.sin(c.theta), *c.xprime])


def cylindrical_arrays(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(rho, theta)`` for an ``(N, n)`` array; theta in [0, 2pi)."""
    X = np.atleast_2d(X)
    rho = np.hypot(X[:, 0], X[:, 1])
    theta = np.mod(np.arctan2(X[:, 1], X[:, 0]), TWO_PI)
    theta[theta >= TWO_PI] = 0.0
    theta[rho == 0.0] = 0.0
    return rho, theta


def rotate(x, beta: float) -> np.ndarray:
    """Rotation ``[rho, theta, x'] -> [rho, theta + beta, x']``."""
    x = np.asarray(x, dtype=float)
    c, s = np.cos(beta), np.sin(beta)
    y = x.copy()
    y[..., 0] = c * x[..., 0] - s * x[..., 1]
    y[..., 1] = s * x[..., 0] + c * x[..., 1]
    return y


def reflect(x, L: Hyperplane) -> np.ndarray:
    """Mirror image of ``x`` (or an ``(N, n)`` array) in the hyperplane ``L``."""
    x = np.asarray(x, dtype=float)
    check_same_dim(x, L.normal)
    a = L.normal
    t = (x @ a - L.offset) / np.dot(a, a)
    return x - 2.0 * np.multiply.outer(t, a) if x.ndim > 1 else x - 2.0 * t * a


def angular_hyperplane(theta: float, n: int) -> Hyperplane:
    """The hyperplane containing the half-hyperplane ``{theta = const}``."""
    normal = np.zeros(n)
    normal[0], normal[1] = -np.sin(theta), np.cos(theta)
    return Hyperplane(normal, 0.0)


def perpendicular_bisector(a1, a2) -> Hyperplane:
    a1, a2 = as_point(a1), as_point(a2)
    check_same_dim(a1, a2)
    d = a1 - a2
    if norm(d) == 0.0:
        raise ValueError("points must be distinct")
    return Hyperplane(d, 0.5 * (np.dot(a1, a1) - np.dot(a2, a2)))
