"""Numerical p-harmonic radii.

Two routes are provided.

* :func:`estimate_radius_modulus` evaluates
  ``phi(t) = lambda_n * M_p(t)**(1/(1-p)) - mu_p(t)`` where ``M_p(t)`` is the
  modulus of the curves joining ``S(a, t)`` to the boundary, and extrapolates
  ``phi(t) -> phi_0`` as ``t -> 0``; the radius is ``mu_inv(-phi_0)``.
* :func:`estimate_radius_pde` (p = 2 only) solves the discrete Laplace
  equation for the regular part ``h`` of the Green function with boundary
  data ``-mu_2(|x - a|)`` and returns ``mu_inv(-h(a))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import least_squares

from .domains import Ball, Complement, Domain, HalfSpace, Intersection, Ring, Side, Union
from .geometry import Sphere, as_point
from .grids import (BOUNDARY, cartesian_lattice, pole_mesh, restrict, spherical_lattice, stretched_axis,
                    uniform_axis)
from .modulus import ConnectorFamily, fe_capacity, solve_modulus, spd_solve
from .radii import ESTIMATE, PExponent, RadiusValue, mu_inv, mu_p


class UnderResolvedError(ValueError):
    """The probe radii do not resolve the domain."""


@dataclass
class RadiusEstimate:
    value: float
    t_sequence: list
    phi_values: list
    extrapolation_error: float
    method: str
    phi_intervals: list = field(default_factory=list)
    discretization_error: float = 0.0
    phi0: float = float("nan")
    info: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        """Absolute error bar on ``value`` (extrapolation plus discretisation)."""
        return self.extrapolation_error + self.discretization_error

    @property
    def interval(self) -> tuple[float, float]:
        return self.value - self.error, self.value + self.error

    def as_radius(self) -> RadiusValue:
        return RadiusValue(self.value, ESTIMATE)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "method": self.method,
            "t_sequence": [float(t) for t in self.t_sequence],
            "phi_values": [float(v) for v in self.phi_values],
            "extrapolation_error": self.extrapolation_error,
            "discretization_error": self.discretization_error,
            "info": self.info,
        }


# -- geometry probes ---------------------------------------------------------------


def _directions(n: int, count: int) -> np.ndarray:
    if n == 2:
        t = np.linspace(0, 2 * np.pi, count, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if n == 3:
        k = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * k / count)
        th = np.pi * (1 + 5**0.5) * k
        return np.stack([np.cos(phi), np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th)], axis=1)
    rng = np.random.default_rng(12345)
    d = rng.normal(size=(count, n))
    d = np.vstack([np.eye(n), -np.eye(n), d])
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def boundary_distance(D: Domain, a, reach: float | None = None, count: int = 2000):
    """Distance from ``a`` to the boundary by marching rays; also the closest direction."""
    a = as_point(a, D.n)
    if not D.contains(a):
        raise ValueError("point is not inside the domain")
    lo, hi = D.bounds()
    if reach is None:
        finite = np.isfinite(lo) & np.isfinite(hi)
        reach = 4.0 * float(np.max(np.abs(np.concatenate([lo[finite] - a[finite], hi[finite] - a[finite]])))) \
            if finite.any() else 1e3
        reach = max(reach, 1.0)
    dirs = _directions(D.n, count)
    s = np.concatenate([np.geomspace(1e-6 * reach, 1e-2 * reach, 60), np.linspace(1e-2 * reach, reach, 600)])
    best, bdir = np.inf, None
    for d in dirs:
        inside = D.contains(a + s[:, None] * d)
        out = np.flatnonzero(~inside)
        if out.size == 0:
            continue
        k = out[0]
        l, u = (s[k - 1] if k > 0 else 0.0), s[k]
        for _ in range(60):
            m = 0.5 * (l + u)
            if D.contains(a + m * d):
                l = m
            else:
                u = m
        if u < best:
            best, bdir = u, d
    return best, bdir


def _rotate_about(X, a, axis, ang):
    k = axis / np.linalg.norm(axis)
    Y = X - a
    c, s = np.cos(ang)[:, None], np.sin(ang)[:, None]
    kx = np.cross(k, Y)
    kd = (Y @ k)[:, None] * k
    return a + Y * c + kx * s + kd * (1 - c)


def axis_hints(D: Domain, a) -> list:
    """Exact candidate axes read off the CSG tree: normals and directions to centres."""
    out = []
    a = np.asarray(a, float)
    if isinstance(D, HalfSpace):
        out.append(D.normal)
    elif isinstance(D, (Ball, Ring)):
        out.append(D.center - a)
    elif isinstance(D, Side):
        s = D.surface
        out.append(s.plane.normal if s.is_plane else s.sphere.center - a)
    elif isinstance(D, (Intersection, Union)):
        for part in D.parts:
            out += axis_hints(part, a)
    elif isinstance(D, Complement):
        out += axis_hints(D.base, a)
    return [v for v in out if np.linalg.norm(v) > 1e-12]


def axisymmetric_axis(D: Domain, a, radius: float, candidates=(), samples: int = 4000, seed: int = 0):
    """An axis through ``a`` about which ``D`` looks rotationally symmetric, or None."""
    if D.n != 3:
        return None
    rng = np.random.default_rng(seed)
    a = np.asarray(a, float)
    X = a + radius * rng.uniform(-1, 1, size=(samples, 3))
    ang = rng.uniform(0, 2 * np.pi, size=samples)
    base = D.contains(X)
    cands = [np.asarray(c, float) for c in candidates if c is not None and np.linalg.norm(c) > 0]
    cands += [np.eye(3)[k] for k in range(3)]
    for ax in cands:
        if np.array_equal(D.contains(_rotate_about(X, a, ax, ang)), base):
            return ax / np.linalg.norm(ax)
    return None


# -- modulus route -------------------------------------------------------------------


def _phi_interval(M_lo, M_hi, t, pe: PExponent):
    e = 1.0 / (1.0 - pe.p)
    mt = mu_p(t, pe)
    return pe.lambda_n * M_hi**e - mt, pe.lambda_n * M_lo**e - mt


def _fit(ts, phis, wts):
    """Weighted fit ``phi = phi0 + c t**q`` with q in [0.25, 4]."""
    ts, phis, wts = map(np.asarray, (ts, phis, wts))
    scale = float(ts.max())
    x = ts / scale

    def res(v):
        return wts * (v[0] + v[1] * x ** v[2] - phis)

    best = None
    for q0 in (0.5, 1.0, 2.0):
        r = least_squares(res, [phis[-1], phis[0] - phis[-1], q0], bounds=([-np.inf, -np.inf, 0.25], [np.inf, np.inf, 4.0]))
        if best is None or r.cost < best.cost:
            best = r
    return float(best.x[0]), float(best.x[2])


def _extrapolate(ts, phis, widths):
    widths = np.asarray(widths)
    scale = max(float(np.max(np.abs(phis))), 1.0)
    wts = 1.0 / (widths + 1e-12 * scale)
    wts = wts / wts.max()
    phi0, q = _fit(ts, phis, wts)
    loo = []
    if len(ts) >= 4:
        for k in range(len(ts)):
            keep = np.arange(len(ts)) != k
            loo.append(_fit(np.asarray(ts)[keep], np.asarray(phis)[keep], wts[keep])[0])
    else:
        loo.append(phis[-1])
    loo.append(phi0)
    spread = float(np.max(loo) - np.min(loo))
    return phi0, q, spread + float(np.max(widths))


def _check_monotone(phis, widths):
    d = np.diff(phis)
    tol = 1e-3 * max(float(np.max(np.abs(phis))), 1.0) + 2 * float(np.max(widths))
    for k in range(len(d) - 1):
        if d[k] * d[k + 1] < 0 and min(abs(d[k]), abs(d[k + 1])) > tol:
            raise UnderResolvedError("phi(t) is not monotone; refine the grid")


def _radius_bar(phi0, err, pe):
    R = mu_inv(-phi0, pe)
    try:
        lo = mu_inv(-(phi0 - err), pe)
        hi = mu_inv(-(phi0 + err), pe)
        bar = max(abs(hi - R), abs(R - lo))
    except ValueError:
        bar = np.inf
    return R, bar


def _pole_radii(dist, reach, t_min, h):
    K = max(4, int(np.ceil(np.log(2) * dist / h)))
    m = int(np.ceil(np.log2(reach / t_min) * K)) + 1
    return t_min * 2.0 ** (np.arange(m + 1) / K)


def _modulus_lattice(D, a, n, dist, reach, t_min, h, axis, p=None):
    r = _pole_radii(dist, reach, t_min, h)
    if n == 2:
        return spherical_lattice(a, r, 0, n_theta=max(8, int(np.ceil(2 * np.pi * dist / h))), p=p), "polar"
    if n == 3:
        n_phi = max(8, int(np.ceil(np.pi * dist / h)))
        if axis is not None:
            return spherical_lattice(a, r, n_phi, 1, axis=axis, p=p), "meridian"
        return spherical_lattice(a, r, n_phi, 2 * n_phi, p=p), "spherical"
    raise ValueError("pole-centred grids are available for n = 2, 3; use kind='cartesian'")


def estimate_radius_modulus(D: Domain, a, pe: PExponent, grid_h: float, *, levels: int = 5,
                            kind: str = "auto", truncate: float = 64.0, axis=None,
                            error_check: bool = True, tol: float = 1e-9) -> RadiusEstimate:
    """R_p(a, D) through the modulus asymptotics.

    Parameters
    ----------
    D, a : domain and a point in it
    pe : exponent data ``(n, p)``
    grid_h : grid step at the scale of ``dist(a, dD)``
    levels : number of probe radii ``t_j = dist/4 * 2**-j``
    kind : "auto" (pole-centred, with the meridian reduction when ``D`` is
        axisymmetric about an axis through ``a``) or "cartesian"
    truncate : unbounded domains are cut to ``D & B(a, truncate * dist)``
    error_check : also solve at ``2 * grid_h`` and add the difference to the
        error bar
    """
    a = as_point(a, pe.n)
    if D.n != pe.n:
        raise ValueError("domain and exponent disagree on dimension")
    dist, ddir = boundary_distance(D, a)
    if not np.isfinite(dist):
        raise ValueError("could not locate the boundary of the domain")
    if dist <= 4 * grid_h and kind == "cartesian":
        raise UnderResolvedError("dist(a, dD) must exceed 4 grid steps")
    def cut(T):
        if D.is_bounded():
            Dt = D
        else:
            Dt = Intersection((D, Ball(a, T * dist)))
        lo, hi = Dt.bounds()
        corners = np.array(np.meshgrid(*zip(lo, hi))).reshape(pe.n, -1).T
        return Dt, lo, hi, float(np.max(np.linalg.norm(corners - a, axis=1))) * 1.01

    Dt, lo, hi, reach = cut(truncate)
    t0 = dist / 4.0
    ts = [t0 * 2.0**-j for j in range(levels)]
    if kind == "cartesian":
        ts = [t for t in ts if t >= 4 * grid_h]
    if len(ts) < 3:
        raise UnderResolvedError("fewer than 3 usable probe radii")

    def run(h, Dt=Dt, lo=lo, hi=hi, reach=reach):
        if kind == "cartesian":
            lat = cartesian_lattice([uniform_axis(l, u, h, c) for l, u, c in zip(lo, hi, a)])
            lk = "cartesian"
        else:
            ax = axis
            if ax is None and pe.n == 3:
                cand = axis_hints(Dt, a) + [ddir, a if np.linalg.norm(a) > 0 else None]
                ax = axisymmetric_axis(Dt, a, min(reach, 4 * dist), cand)
            lat, lk = _modulus_lattice(Dt, a, pe.n, dist, reach, ts[-1], h, ax, pe.p)
        out = []
        if pe.p > 2 and lk in ("polar", "meridian"):
            # isotropic P1 capacity; the edge energy is biased along grid axes
            r = _pole_radii(dist, reach, ts[-1], h)
            n_ang = lat.params["n_theta"] if lk == "polar" else lat.params["n_phi"]
            for t in ts:
                mesh = pole_mesh(a, r, n_ang, Dt, holes=[(Sphere(a, t), "S")], axis=lat.params.get("axis"))
                cap = fe_capacity(mesh, "S", BOUNDARY, pe.p).value
                out.append(_phi_interval(cap, cap, t, pe))
            return np.array(out), lk + "-fe", len(mesh.plane)
        for t in ts:
            G = restrict(lat, Dt, holes=[(Sphere(a, t), "S")])
            fam = ConnectorFamily(G, "S", BOUNDARY)
            res = solve_modulus(fam, pe, tol=tol)
            out.append(_phi_interval(res.lower, res.upper, t, pe))
        return np.array(out), lk, lat.points.shape[0]

    iv, lk, nodes = run(grid_h)
    phis = 0.5 * (iv[:, 0] + iv[:, 1])
    widths = iv[:, 1] - iv[:, 0]
    _check_monotone(phis, widths)
    phi0, q, err_phi = _extrapolate(ts, phis, widths)
    R, ext_err = _radius_bar(phi0, err_phi, pe)
    disc = 0.0
    info = {"grid": lk, "nodes": int(nodes), "dist": dist, "q": q,
            "anisotropic": pe.p != 2 and not lk.endswith("-fe")}
    if error_check:
        iv2, _, _ = run(2 * grid_h)
        p2 = 0.5 * (iv2[:, 0] + iv2[:, 1])
        phi02, _, _ = _extrapolate(ts, p2, iv2[:, 1] - iv2[:, 0])
        R2 = mu_inv(-phi02, pe)
        disc = abs(R - R2)
        info["coarse_value"] = R2
    if not D.is_bounded() and error_check:
        # the error of the cut domain decays in the cut radius, so the change
        # from halving it bounds the remaining error
        iv3, _, _ = run(grid_h, *cut(truncate / 2))
        p3 = 0.5 * (iv3[:, 0] + iv3[:, 1])
        phi03, _, _ = _extrapolate(ts, p3, iv3[:, 1] - iv3[:, 0])
        R3 = mu_inv(-phi03, pe)
        info["truncation_error"] = abs(R - R3)
        disc += abs(R - R3)
    return RadiusEstimate(R, ts, phis.tolist(), ext_err, "modulus", iv.tolist(), disc, phi0, info)


# -- PDE route (p = 2) -----------------------------------------------------------------


def _green_regular(D, a, n, h, truncate, stretch):
    dist, _ = boundary_distance(D, a)
    Dt = D
    if not D.is_bounded():
        Dt = Intersection((D, Ball(a, truncate * dist)))
    lo, hi = Dt.bounds()
    axes = []
    for k in range(n):
        if stretch:
            reach = max(a[k] - lo[k], hi[k] - a[k])
            ax = stretched_axis(a[k], h, min(2 * dist, reach), reach + h)
            ax = ax[(ax >= lo[k] - h) & (ax <= hi[k] + h)]
        else:
            ax = uniform_axis(lo[k] - h, hi[k] + h, h, anchor=a[k])
        axes.append(ax)
    lat = cartesian_lattice(axes)
    G = restrict(lat, Dt)
    bd = G.tag(BOUNDARY)
    pe = PExponent(n, 2)
    vals = np.zeros(G.n_nodes)
    vals[bd] = -mu_p(np.linalg.norm(G.points[bd] - a, axis=1), pe)
    fixed = np.zeros(G.n_nodes, dtype=bool)
    fixed[bd] = True
    free = np.flatnonzero(~fixed)
    Dm = G.incidence()
    c = G.weight / G.length**2
    L = (Dm.T @ sp.diags(c) @ Dm).tocsr()
    Lff = L[free][:, free]
    rhs = -(L[free][:, fixed] @ vals[fixed])
    hf = spd_solve(Lff, rhs, rtol=1e-12)
    resid = float(np.linalg.norm(Lff @ hf - rhs) / max(np.linalg.norm(rhs), 1e-300))
    vals[free] = hf
    k = int(np.argmin(np.linalg.norm(G.points - a, axis=1)))
    if np.linalg.norm(G.points[k] - a) > 1e-9 * max(h, 1.0):
        raise RuntimeError("the pole is not a grid node")
    return float(vals[k]), resid, G.n_nodes, dist


def estimate_radius_pde(D: Domain, a, n: int, grid_h: float, *, truncate: float = 8.0,
                        stretch: bool | None = None, error_check: bool = True) -> RadiusEstimate:
    """Harmonic radius from the discrete Dirichlet problem for the regular part.

    The grid is Cartesian, anchored at ``a``; boundary nodes sit on the exact
    crossings of grid lines with the boundary.  With ``error_check`` the
    problem is also solved at ``2 * grid_h`` and Richardson extrapolation
    (second order) gives the returned value; the error bar is the whole
    fine/coarse change.
    """
    if n < 3:
        raise ValueError("the harmonic radius route needs n >= 3")
    a = as_point(a, n)
    if not D.contains(a):
        raise ValueError("point is not inside the domain")
    if stretch is None:
        stretch = not D.is_bounded()
    pe = PExponent(n, 2)
    h_a, resid, nodes, dist = _green_regular(D, a, n, grid_h, truncate, stretch)
    if resid > 1e-8:
        raise RuntimeError(f"linear solve residual {resid:.2e} exceeds 1e-8")
    if h_a >= 0:
        raise UnderResolvedError("h(a) >= 0: geometry is inconsistent or under-resolved")
    R = mu_inv(-h_a, pe)
    info = {"h_at_pole": h_a, "residual": resid, "nodes": int(nodes), "dist": dist, "raw_value": R}
    err = 0.0
    value = R
    if error_check:
        h2, _, _, _ = _green_regular(D, a, n, 2 * grid_h, truncate, stretch)
        R2 = mu_inv(-h2, pe)
        value = R + (R - R2) / 3.0
        # the full fine/coarse change, not a third of it: coarse grids are
        # often outside the asymptotic range
        err = abs(R - R2) + 1e-12
        info["coarse_value"] = R2
    if not D.is_bounded() and error_check:
        h3, _, _, _ = _green_regular(D, a, n, grid_h, truncate / 2, stretch)
        info["truncation_error"] = abs(R - mu_inv(-h3, pe))
        err += info["truncation_error"]
    return RadiusEstimate(value, [], [], 0.0, "pde", [], err, float("nan"), info)
