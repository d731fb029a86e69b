"""Weighted grid graphs carrying discrete curve families.

A :class:`Lattice` is a full tensor-product grid (Cartesian, cylindrical or
pole-centred spherical) with edge lengths ``length`` and cell volumes
``weight``.  :func:`restrict` cuts a lattice down to a domain minus closed
balls ("holes").  Edges that leave the region are shortened to the exact
crossing point, where a new boundary node is placed and tagged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .domains import Ball, Domain
from .geometry import TWO_PI, Sphere

GRID_SCHEMA = "pharmlab.grid/1"
BOUNDARY = "dD"


def _ro(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Lattice:
    kind: str
    points: np.ndarray
    edges: np.ndarray
    length: np.ndarray
    weight: np.ndarray
    axis: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("points", "edges", "length", "weight", "axis"):
            object.__setattr__(self, name, _ro(getattr(self, name)))

    @property
    def n(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class GridGraph:
    """An undirected weighted graph with named node subsets.

    ``weight`` is the volume weight sigma_e used in the energy
    ``sum sigma_e rho_e**p``; ``length`` is the Euclidean length l_e.
    """

    kind: str
    points: np.ndarray
    edges: np.ndarray
    length: np.ndarray
    weight: np.ndarray
    tags: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        ln = np.asarray(self.length, dtype=float)
        w = np.asarray(self.weight, dtype=float)
        if len(e) != len(ln) or len(e) != len(w):
            raise ValueError("edges, length and weight must have equal length")
        if len(e) and (e.min() < 0 or e.max() >= len(pts)):
            raise ValueError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self loops are not allowed")
        if np.any(ln <= 0) or np.any(w <= 0):
            raise ValueError("edge lengths and weights must be positive")
        for name, arr in (("points", pts), ("edges", e), ("length", ln), ("weight", w)):
            object.__setattr__(self, name, _ro(arr))
        object.__setattr__(self, "tags", {k: _ro(np.unique(np.asarray(v, dtype=np.int64)))
                                          for k, v in self.tags.items()})

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def n_nodes(self) -> int:
        return len(self.points)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def incidence(self) -> sp.csr_matrix:
        """``D`` with ``(D u)_e = u[j] - u[i]`` for edge ``e = (i, j)``."""
        E = self.n_edges
        rows = np.repeat(np.arange(E), 2)
        cols = self.edges.ravel()
        vals = np.tile([-1.0, 1.0], E)
        return sp.csr_matrix((vals, (rows, cols)), shape=(E, self.n_nodes))

    def tag(self, name: str) -> np.ndarray:
        try:
            return self.tags[name]
        except KeyError:
            raise KeyError(f"unknown tag {name!r}; have {sorted(self.tags)}") from None

    def with_tags(self, **tags) -> "GridGraph":
        return GridGraph(self.kind, self.points, self.edges, self.length, self.weight,
                         {**self.tags, **tags}, self.meta)

    def edge_lookup(self) -> dict:
        return {(min(i, j), max(i, j)): k for k, (i, j) in enumerate(self.edges.tolist())}

    def node_map(self, fn, tol: float = 1e-9) -> np.ndarray:
        """Index of the node at ``fn(x)`` for every node ``x``, or -1."""
        tree = cKDTree(self.points)
        d, idx = tree.query(fn(self.points), distance_upper_bound=tol)
        return np.where(np.isfinite(d), idx, -1)

    def edge_map(self, fn, tol: float = 1e-9) -> np.ndarray:
        """Edge index of the image of every edge under a node isometry, or -1."""
        nm = self.node_map(fn, tol)
        lookup = self.edge_lookup()
        out = np.full(self.n_edges, -1, dtype=np.int64)
        for k, (i, j) in enumerate(self.edges.tolist()):
            a, b = nm[i], nm[j]
            if a >= 0 and b >= 0:
                out[k] = lookup.get((min(a, b), max(a, b)), -1)
        return out

    def to_json(self, density=None) -> str:
        doc = {
            "schema": GRID_SCHEMA,
            "kind": self.kind,
            "n": self.n,
            "nodes": self.points.tolist(),
            "edges": [[int(i), int(j), float(l), float(w)]
                      for (i, j), l, w in zip(self.edges, self.length, self.weight)],
            "tags": {k: v.tolist() for k, v in sorted(self.tags.items())},
        }
        if density is not None:
            doc["density"] = np.asarray(density, float).tolist()
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GridGraph":
        doc = json.loads(text)
        if doc.get("schema") != GRID_SCHEMA:
            raise ValueError("unsupported grid schema")
        e = np.asarray(doc["edges"], float).reshape(-1, 4)
        pts = np.asarray(doc["nodes"], float).reshape(-1, doc["n"])
        return cls(doc["kind"], pts, e[:, :2].astype(np.int64), e[:, 2], e[:, 3], doc["tags"])


def explicit_graph(edges, length=None, weight=None, n_nodes=None, tags=None, points=None) -> GridGraph:
    """A small abstract graph (unit lengths and weights by default)."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    N = int(n_nodes if n_nodes is not None else e.max() + 1)
    ln = np.ones(len(e)) if length is None else np.asarray(length, float)
    w = np.ones(len(e)) if weight is None else np.asarray(weight, float)
    pts = np.zeros((N, 2)) if points is None else np.asarray(points, float)
    return GridGraph("explicit", pts, e, ln, w, tags or {})


# -- lattices -------------------------------------------------------------------


def _duals(c: np.ndarray, geometric: bool = False) -> np.ndarray:
    """Dual-cell widths of a sorted coordinate vector."""
    if len(c) == 1:
        return np.ones(1)
    mid = np.sqrt(c[1:] * c[:-1]) if geometric else 0.5 * (c[1:] + c[:-1])
    lo = np.concatenate([[c[0]], mid])
    hi = np.concatenate([mid, [c[-1]]])
    return hi - lo


def _grid_edges(shape, periodic=()):
    """Neighbour pairs of a tensor grid in C order, with the axis of each pair."""
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    edges, axes = [], []
    for d, s in enumerate(shape):
        if s < 2:
            continue
        a = np.take(idx, np.arange(s - 1), axis=d).ravel()
        b = np.take(idx, np.arange(1, s), axis=d).ravel()
        if d in periodic and s > 2:
            a = np.concatenate([a, np.take(idx, [s - 1], axis=d).ravel()])
            b = np.concatenate([b, np.take(idx, [0], axis=d).ravel()])
        edges.append(np.stack([a, b], axis=1))
        axes.append(np.full(len(a), d))
    return np.concatenate(edges), np.concatenate(axes)


def uniform_axis(lo: float, hi: float, h: float, anchor: float = 0.0) -> np.ndarray:
    """Points ``anchor + k h`` inside ``[lo, hi]``."""
    k0 = np.ceil((lo - anchor) / h - 1e-9)
    k1 = np.floor((hi - anchor) / h + 1e-9)
    return anchor + h * np.arange(k0, k1 + 1)


def stretched_axis(center: float, h: float, inner: float, outer: float, ratio: float = 1.15) -> np.ndarray:
    """Uniform step ``h`` on ``|x - center| <= inner``, geometric growth out to ``outer``."""
    core = uniform_axis(center - inner, center + inner, h, anchor=center)
    right = [core[-1]]
    step = h
    while right[-1] < center + outer:
        step *= ratio
        right.append(right[-1] + step)
    tail = np.array(right[1:]) - center
    return np.concatenate([center - tail[::-1], core, center + tail])


def cartesian_lattice(axes) -> Lattice:
    """Tensor Cartesian lattice from per-axis sorted coordinates."""
    axes = [np.asarray(a, float) for a in axes]
    shape = tuple(len(a) for a in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    edges, ax = _grid_edges(shape)
    duals = [_duals(a) for a in axes]
    length = np.empty(len(edges))
    weight = np.empty(len(edges))
    multi = np.stack(np.unravel_index(np.arange(points.shape[0]), shape), axis=1)
    for d in range(len(axes)):
        sel = ax == d
        i, j = edges[sel, 0], edges[sel, 1]
        ln = np.abs(points[j, d] - points[i, d])
        cross = np.ones(sel.sum())
        for o in range(len(axes)):
            if o != d:
                cross *= duals[o][multi[i, o]]
        length[sel] = ln
        weight[sel] = ln * cross
    return Lattice("cartesian", points, edges, length, weight, ax,
                   {"axes": [a.tolist() for a in axes]})


def cubic_lattice(lo, hi, h: float, anchor=None) -> Lattice:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    anchor = np.zeros(lo.size) if anchor is None else np.asarray(anchor, float)
    return cartesian_lattice([uniform_axis(l, u, h, c) for l, u, c in zip(lo, hi, anchor)])


def cylindrical_lattice(rho, n_theta: int, xprime=(), offset: float = 0.5, split: bool = False) -> Lattice:
    """Lattice on ``[rho_i, theta_j, x'_k]`` with ``theta_j = (j + offset) 2pi/n_theta``.

    With ``split`` every theta edge is cut in two at its angular midpoint, so
    that sector boundaries placed at those midpoints never lie inside an edge.
    """
    rho = np.asarray(rho, float)
    if np.any(rho <= 0) or np.any(np.diff(rho) <= 0):
        raise ValueError("rho nodes must be positive and increasing")
    if n_theta < 3:
        raise ValueError("need at least 3 theta nodes")
    xprime = [np.asarray(x, float) for x in xprime]
    dth = TWO_PI / n_theta
    theta = (np.arange(n_theta) + offset) * dth
    shape = (len(rho), n_theta, *(len(x) for x in xprime))
    mesh = np.meshgrid(rho, theta, *xprime, indexing="ij")
    R, T = mesh[0].ravel(), mesh[1].ravel()
    points = np.stack([R * np.cos(T), R * np.sin(T), *(m.ravel() for m in mesh[2:])], axis=1)
    edges, ax = _grid_edges(shape, periodic=(1,))
    multi = np.stack(np.unravel_index(np.arange(len(points)), shape), axis=1)
    drho = _duals(rho)
    dx = [_duals(x) for x in xprime]
    length = np.empty(len(edges))
    weight = np.empty(len(edges))
    for d in range(len(shape)):
        sel = ax == d
        i, j = edges[sel, 0], edges[sel, 1]
        mi = multi[i]
        xcross = np.ones(sel.sum())
        for o in range(len(xprime)):
            if o + 2 != d:
                xcross *= dx[o][mi[:, o + 2]]
        if d == 0:
            r0, r1 = rho[mi[:, 0]], rho[mi[:, 0] + 1]
            ln = r1 - r0
            vol = 0.5 * (r1**2 - r0**2) * dth * xcross
        elif d == 1:
            r = rho[mi[:, 0]]
            ln = r * dth
            vol = r * drho[mi[:, 0]] * dth * xcross
        else:
            r = rho[mi[:, 0]]
            ln = np.abs(points[j, d] - points[i, d])
            vol = r * drho[mi[:, 0]] * dth * ln * xcross
        length[sel] = ln
        weight[sel] = vol
    params = {"rho": rho.tolist(), "n_theta": n_theta, "offset": offset, "split": split,
              "xprime": [x.tolist() for x in xprime]}
    lat = Lattice("cylindrical", points, edges, length, weight, ax, params)
    return _split_theta(lat, dth) if split else lat


def _split_theta(lat: Lattice, dth: float) -> Lattice:
    sel = lat.axis == 1
    e = lat.edges[sel]
    P = lat.points
    rho = np.hypot(P[e[:, 0], 0], P[e[:, 0], 1])
    th0 = np.arctan2(P[e[:, 0], 1], P[e[:, 0], 0])
    mid_t = th0 + 0.5 * dth
    mids = P[e[:, 0]].copy()
    mids[:, 0], mids[:, 1] = rho * np.cos(mid_t), rho * np.sin(mid_t)
    new_ids = len(P) + np.arange(len(e))
    halves = np.concatenate([np.stack([e[:, 0], new_ids], 1), np.stack([new_ids, e[:, 1]], 1)])
    hl = np.tile(0.5 * lat.length[sel], 2)
    hw = np.tile(0.5 * lat.weight[sel], 2)
    keep = ~sel
    return Lattice(
        lat.kind,
        np.vstack([P, mids]),
        np.vstack([lat.edges[keep], halves]),
        np.concatenate([lat.length[keep], hl]),
        np.concatenate([lat.weight[keep], hw]),
        np.concatenate([lat.axis[keep], np.ones(len(halves), dtype=lat.axis.dtype)]),
        lat.params,
    )


def _radial_measure(r0, r1, n, p):
    """Radial factor of the weight of an edge ``[r0, r1]`` (volume if ``p`` is None)."""
    if p is None:
        return (r1**n - r0**n) / n
    k = (n - 1) / (p - 1)
    if abs(k - 1) < 1e-14:
        integral = np.log(r1 / r0)
    else:
        integral = (r0 ** (1 - k) - r1 ** (1 - k)) / (k - 1)
    return (r1 - r0) ** p * integral ** (1 - p)


def spherical_lattice(center, r, n_phi: int, n_theta: int = 1, axis=None, p: float | None = None) -> Lattice:
    """Pole-centred lattice around ``center`` (n = 2 or 3).

    n = 2: polar nodes ``[r_i, theta_j]`` with ``n_theta`` offset angles
    (``n_phi`` is ignored).  n = 3: nodes ``[r_i, phi_j, theta_k]`` with polar
    angle ``phi_j = (j + 1/2) pi / n_phi`` measured from ``axis``.  With
    ``n_theta = 1`` the lattice is the meridian reduction of an axisymmetric
    problem: every node stands for a full ring and weights integrate over
    theta.

    Given ``p``, radial weights are chosen so that the energy of a radial
    potential is exact: ``sigma = Omega l**p (mu_p(r_i) - mu_p(r_i+1))**(1-p)``
    with ``Omega`` the angular measure of the cell.
    """
    if p is not None and p <= 1:
        raise ValueError("p must exceed 1")
    c = np.asarray(center, float)
    r = np.asarray(r, float)
    if np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise ValueError("radii must be positive and increasing")
    dr = _duals(r, geometric=True)
    if c.size == 2:
        if n_theta < 3:
            raise ValueError("need n_theta >= 3 in the plane")
        dth = TWO_PI / n_theta
        th = (np.arange(n_theta) + 0.5) * dth
        shape = (len(r), n_theta)
        R, T = (m.ravel() for m in np.meshgrid(r, th, indexing="ij"))
        points = c + np.stack([R * np.cos(T), R * np.sin(T)], axis=1)
        edges, ax = _grid_edges(shape, periodic=(1,))
        multi = np.stack(np.unravel_index(np.arange(len(points)), shape), axis=1)
        i = edges[:, 0]
        ri = r[multi[i, 0]]
        rad = ax == 0
        r1 = np.where(rad, r[np.minimum(multi[i, 0] + 1, len(r) - 1)], ri)
        length = np.where(rad, r1 - ri, ri * dth)
        weight = ri * dr[multi[i, 0]] * dth
        weight[rad] = _radial_measure(ri[rad], r1[rad], 2, p) * dth
        return Lattice("spherical", points, edges, length, weight, ax,
                       {"center": c.tolist(), "r": r.tolist(), "n_theta": n_theta})
    if c.size != 3:
        raise ValueError("spherical lattices support n = 2 or 3")
    if n_theta == 2 or n_theta < 1:
        raise ValueError("n_theta must be 1 or >= 3")
    e_ax = np.array([1.0, 0, 0]) if axis is None else np.asarray(axis, float) / np.linalg.norm(axis)
    u = np.cross(e_ax, [0, 0, 1.0] if abs(e_ax[2]) < 0.9 else [1.0, 0, 0])
    u /= np.linalg.norm(u)
    v = np.cross(e_ax, u)
    dph = np.pi / n_phi
    ph = (np.arange(n_phi) + 0.5) * dph
    dth = TWO_PI / n_theta
    th = (np.arange(n_theta) + 0.5) * dth
    shape = (len(r), n_phi, n_theta)
    R, PH, T = (m.ravel() for m in np.meshgrid(r, ph, th, indexing="ij"))
    dirs = (np.cos(PH)[:, None] * e_ax + np.sin(PH)[:, None] * (np.cos(T)[:, None] * u + np.sin(T)[:, None] * v))
    points = c + R[:, None] * dirs
    edges, ax = _grid_edges(shape, periodic=(2,) if n_theta >= 3 else ())
    multi = np.stack(np.unravel_index(np.arange(len(points)), shape), axis=1)
    i = edges[:, 0]
    ir, ip = multi[i, 0], multi[i, 1]
    ri = r[ir]
    phi_i = ph[ip]
    # solid angle of the phi-dual cell, exact: integral of sin over the cell
    cap = np.cos(ph - 0.5 * dph) - np.cos(ph + 0.5 * dph)
    length = np.empty(len(edges))
    weight = np.empty(len(edges))
    sel = ax == 0
    r1 = r[np.minimum(ir[sel] + 1, len(r) - 1)]
    length[sel] = r1 - ri[sel]
    weight[sel] = _radial_measure(ri[sel], r1, 3, p) * cap[ip[sel]] * dth
    sel = ax == 1
    length[sel] = ri[sel] * dph
    weight[sel] = ri[sel] ** 2 * dr[ir[sel]] * (np.cos(phi_i[sel]) - np.cos(phi_i[sel] + dph)) * dth
    sel = ax == 2
    length[sel] = ri[sel] * np.sin(phi_i[sel]) * dth
    weight[sel] = ri[sel] ** 2 * dr[ir[sel]] * cap[ip[sel]] * dth
    return Lattice("spherical", points, edges, length, weight, ax,
                   {"center": c.tolist(), "r": r.tolist(), "n_phi": n_phi, "n_theta": n_theta,
                    "axis": e_ax.tolist()})


# -- restriction to a domain ------------------------------------------------------


def _bisect_exit(domain: Domain, A: np.ndarray, B: np.ndarray, lo: np.ndarray, hi: np.ndarray, iters: int = 60):
    """Largest-inside parameter on segments A + s (B - A), s in [lo, hi]."""
    lo, hi = lo.copy(), hi.copy()
    D = B - A
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = domain.contains(A + mid[:, None] * D)
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.all(hi - lo < 1e-13):
            break
    return 0.5 * (lo + hi)


def _hole_entry(A, B, hole: Sphere, snap: float):
    """First parameter s in (0, 1] where A + s (B - A) enters the open hole, else inf."""
    D = B - A
    q = A - hole.center
    a = np.einsum("ij,ij->i", D, D)
    b = 2 * np.einsum("ij,ij->i", D, q)
    c = np.einsum("ij,ij->i", q, q) - hole.radius**2
    disc = b * b - 4 * a * c
    s = np.full(len(A), np.inf)
    ok = disc > 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    s1 = (-b - sq) / (2 * a)
    s2 = (-b + sq) / (2 * a)
    # the chord is inside the ball on (s1, s2); it enters at s1 if that is ahead
    tol = snap * hole.radius / np.sqrt(a)
    enter = ok & (s2 > tol) & (s1 < 1 - tol) & (s2 - s1 > 2 * tol)
    s = np.where(enter, np.where(s1 <= tol, 0.0, s1), s)
    return s


def restrict(lattice: Lattice, domain: Domain, holes=(), boundary_tag: str = BOUNDARY,
             snap: float = 1e-9, probes=(0.25, 0.5, 0.75)) -> GridGraph:
    """Graph of ``domain`` minus the closed balls in ``holes``.

    ``holes`` is a sequence of ``(Sphere, tag)`` pairs.  Lattice nodes within
    ``snap * radius`` of a hole sphere are kept and tagged.  Every edge that
    leaves the region is shortened to the crossing point (found analytically
    for holes and by bisection for the domain); the new endpoint becomes a
    node tagged ``boundary_tag`` or the hole tag.
    """
    P = lattice.points
    N = len(P)
    in_dom = domain.contains(P)
    region = in_dom.copy()
    surface = {}
    for hole, tag in holes:
        d = np.linalg.norm(P - hole.center, axis=1)
        on = np.abs(d - hole.radius) <= snap * hole.radius
        region &= d >= hole.radius * (1 - snap)
        surface[tag] = on
    for tag in surface:
        surface[tag] &= region
    any_surface = np.zeros(N, dtype=bool)
    for on in surface.values():
        any_surface |= on

    E = lattice.edges
    i, j = E[:, 0], E[:, 1]
    use = region[i] | region[j]
    E, ln, w = E[use], lattice.length[use], lattice.weight[use]
    i, j = E[:, 0], E[:, 1]
    # edges between two surface nodes of holes run along the hole; drop them
    both_surface = any_surface[i] & any_surface[j]
    E, ln, w = E[~both_surface], ln[~both_surface], w[~both_surface]
    i, j = E[:, 0], E[:, 1]

    def exits(a, b):
        """Exit parameter and exit tag for half-edges starting at region node a."""
        A, B = P[a], P[b]
        s = np.ones(len(a))
        tag = np.full(len(a), -1)  # -1: none, 0: domain, k+1: hole k
        # domain exit
        bad_end = ~in_dom[b]
        first_bad = np.where(bad_end, 1.0, np.inf)
        for pr in sorted(probes, reverse=True):
            inside = domain.contains(A + pr * (B - A))
            first_bad = np.where(~inside, pr, first_bad)
        hit = np.isfinite(first_bad)
        if hit.any():
            lo = np.zeros(hit.sum())
            for pr in sorted(probes):
                lo = np.where(pr < first_bad[hit], pr, lo)
            sd = _bisect_exit(domain, A[hit], B[hit], lo, first_bad[hit])
            s[hit] = sd
            tag[hit] = 0
        for k, (hole, _t) in enumerate(holes):
            sh = _hole_entry(A, B, hole, snap)
            closer = sh < np.where(tag >= 0, s, np.inf)
            s = np.where(closer, sh, s)
            tag = np.where(closer, k + 1, tag)
        return s, tag

    full_mask = region[i] & region[j]
    s_ij = np.ones(len(E))
    t_ij = np.full(len(E), -1)
    s_ji = np.ones(len(E))
    t_ji = np.full(len(E), -1)
    ri, rj = region[i], region[j]
    if ri.any():
        s_ij[ri], t_ij[ri] = exits(i[ri], j[ri])
    if rj.any():
        s_ji[rj], t_ji[rj] = exits(j[rj], i[rj])
    full = full_mask & (t_ij < 0) & (t_ji < 0)

    keep_nodes = np.flatnonzero(region)
    renum = -np.ones(N, dtype=np.int64)
    renum[keep_nodes] = np.arange(len(keep_nodes))
    pts = [P[keep_nodes]]
    new_edges = [np.stack([renum[i[full]], renum[j[full]]], axis=1)]
    new_len = [ln[full]]
    new_w = [w[full]]
    tag_lists = {boundary_tag: [], **{t: [renum[np.flatnonzero(on)]] for t, on in surface.items()}}
    tag_lists.setdefault(boundary_tag, [])
    next_id = len(keep_nodes)
    hole_tags = [t for _h, t in holes]
    for a, b, s, tg, ok in ((i, j, s_ij, t_ij, ri & ~full), (j, i, s_ji, t_ji, rj & ~full)):
        sel = ok & (tg >= 0) & (s > 1e-12)
        # an exit right at the start node puts that node on the boundary
        touch = ok & (tg >= 0) & (s <= 1e-12)
        for k in np.unique(tg[touch]):
            name = boundary_tag if k == 0 else hole_tags[k - 1]
            tag_lists.setdefault(name, []).append(renum[a[touch & (tg == k)]])
        # a region end whose far end is outside everything but no exit found: clamp
        lost = ok & (tg < 0) & ~region[b]
        if lost.any():
            s = s.copy()
            tg = tg.copy()
            s[lost], tg[lost] = 1.0, 0
            sel |= lost
        if not sel.any():
            continue
        A, B = P[a[sel]], P[b[sel]]
        X = A + s[sel, None] * (B - A)
        ids = next_id + np.arange(len(X))
        next_id += len(X)
        pts.append(X)
        new_edges.append(np.stack([renum[a[sel]], ids], axis=1))
        new_len.append(s[sel] * ln[sel])
        new_w.append(s[sel] * w[sel])
        for k in np.unique(tg[sel]):
            name = boundary_tag if k == 0 else hole_tags[k - 1]
            tag_lists.setdefault(name, []).append(ids[tg[sel] == k])
    tags = {k: np.concatenate(v) if v else np.zeros(0, dtype=np.int64) for k, v in tag_lists.items()}
    meta = {"lattice": lattice.kind, **{k: v for k, v in lattice.params.items() if k in ("center", "n_theta", "n_phi", "offset", "split")}}
    return GridGraph(lattice.kind, np.vstack(pts), np.vstack(new_edges), np.concatenate(new_len),
                     np.concatenate(new_w), tags, meta)


# -- simplicial meshes for the isotropic energy ----------------------------------------


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangles in a computational plane with the measure of each triangle.

    For a meridian mesh the plane is ``(x, y)`` with ``x`` along the symmetry
    axis and ``y >= 0`` the distance to it; the measure ``2 pi y dA`` turns a
    planar integral into the volume integral of an axisymmetric function.
    """

    plane: np.ndarray
    points: np.ndarray
    triangles: np.ndarray
    measure: np.ndarray
    tags: dict
    kind: str

    def gradient_operator(self) -> sp.csr_matrix:
        """``B`` with ``(B u)[2k:2k+2]`` the gradient of the P1 function on triangle k."""
        P = self.plane[self.triangles]
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        # gradients of the barycentric coordinates
        g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
        g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
        g0 = -g1 - g2
        T = len(self.triangles)
        rows = np.repeat(np.arange(2 * T).reshape(T, 2), 3, axis=1).reshape(T, 2, 3)
        cols = np.broadcast_to(self.triangles[:, None, :], (T, 2, 3))
        vals = np.stack([g0, g1, g2], axis=2)
        return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(2 * T, len(self.plane)))


def pole_mesh(center, r, n_ang: int, domain: Domain, holes=(), axis=None, boundary_tag: str = BOUNDARY) -> TriMesh:
    """P1 mesh of ``domain`` minus ``holes`` on a pole-centred polar grid.

    n = 2: the full plane around ``center`` with ``n_ang`` angles.  n = 3:
    the meridian half-plane of an axisymmetric problem with polar angles
    ``j pi / n_ang``, axis nodes included.  Boundary crossings come from
    :func:`restrict` on the grid edges and diagonals; the node set is then
    Delaunay-triangulated and triangles with centroids outside the region are
    dropped.  The radii must reach past the outer boundary; a last ring lying
    on it is not reliably tagged.
    """
    from scipy.spatial import Delaunay

    c = np.asarray(center, float)
    r = np.asarray(r, float)
    n = c.size
    if n == 2:
        ang = np.arange(n_ang) * (TWO_PI / n_ang)
        shape = (len(r), n_ang)
        periodic = (1,)
        e_ax, u = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    elif n == 3:
        ang = np.arange(n_ang + 1) * (np.pi / n_ang)
        shape = (len(r), n_ang + 1)
        periodic = ()
        e_ax = np.array([1.0, 0, 0]) if axis is None else np.asarray(axis, float) / np.linalg.norm(axis)
        u = np.cross(e_ax, [0, 0, 1.0] if abs(e_ax[2]) < 0.9 else [1.0, 0, 0])
        u /= np.linalg.norm(u)
    else:
        raise ValueError("pole meshes support n = 2 or 3")
    R, A = (m.ravel() for m in np.meshgrid(r, ang, indexing="ij"))
    plane = np.stack([R * np.cos(A), R * np.sin(A)], axis=1)
    embed = c + plane[:, :1] * e_ax + plane[:, 1:] * u
    edges, ax = _grid_edges(shape, periodic)
    idx = np.arange(len(R)).reshape(shape)
    na = shape[1]
    if n == 2:
        d1 = np.stack([idx[:-1, :].ravel(), np.roll(idx, -1, axis=1)[1:, :].ravel()], axis=1)
    else:
        d1 = np.stack([idx[:-1, :-1].ravel(), idx[1:, 1:].ravel()], axis=1)
    edges = np.vstack([edges, d1])
    ln = np.linalg.norm(embed[edges[:, 1]] - embed[edges[:, 0]], axis=1)
    lat = Lattice("pole", embed, edges, ln, ln, np.zeros(len(edges), dtype=int))
    G = restrict(lat, domain, holes, boundary_tag=boundary_tag)
    # crossings of nodes lying exactly on a boundary duplicate those nodes
    scale = 1e-12 * max(1.0, float(np.max(np.abs(G.points - c))))
    _, first, inv = np.unique(np.round((G.points - c) / scale), axis=0, return_index=True, return_inverse=True)
    inv = np.ravel(inv)
    pts = G.points[first]
    tags = {k: np.unique(inv[v]) for k, v in G.tags.items()}
    Y = pts - c
    x = Y @ e_ax
    if n == 2:
        pl = Y.copy()
    else:
        y = np.linalg.norm(Y - x[:, None] * e_ax, axis=1)
        pl = np.stack([x, y], axis=1)
    tri = Delaunay(pl).simplices
    P = pl[tri]
    area2 = (P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1]) - (P[:, 1, 1] - P[:, 0, 1]) * (P[:, 2, 0] - P[:, 0, 0])
    tri = np.where((area2 < 0)[:, None], tri[:, [0, 2, 1]], tri)
    area = 0.5 * np.abs(area2)
    cen = pts[tri].mean(axis=1)
    keep = domain.contains(cen) & (area > 1e-14 * float(np.max(area)))
    for hole, _t in holes:
        keep &= np.linalg.norm(cen - hole.center, axis=1) > hole.radius
    tri, area = tri[keep], area[keep]
    if n == 3:
        meas = TWO_PI * pl[tri, 1].mean(axis=1) * area
        kind = "meridian"
    else:
        meas = area
        kind = "polar"
    return TriMesh(pl, pts, tri, meas, tags, kind)


def annulus_graph(r: float, R: float, n: int, h: float, p: float | None = None, kind: str = "pole") -> GridGraph:
    """Graph of ``r < |x| < R`` with tags ``"S"`` (inner sphere) and ``dD`` (outer).

    ``kind="pole"`` uses a centred spherical lattice (meridian reduction in
    n = 3); ``p`` switches on exponent-aware radial weights.  ``"cartesian"``
    restricts a square lattice of step ``h``.
    """
    if not 0 < r < R:
        raise ValueError("need 0 < r < R")
    c = np.zeros(n)
    if kind == "cartesian":
        lat = cubic_lattice(c - R - h, c + R + h, h, anchor=c)
        return restrict(lat, Ball(c, R), holes=[(Sphere(c, r), "S")])
    if kind != "pole":
        raise ValueError(f"unknown annulus grid {kind!r}")
    rad = np.linspace(r, R, int(np.ceil((R - r) / h)) + 1)
    if n == 2:
        lat = spherical_lattice(c, rad, 1, int(np.ceil(TWO_PI * R / h)), p=p)
    else:
        lat = spherical_lattice(c, rad, int(np.ceil(np.pi * R / h)), 1, p=p)
    k = len(lat.points) // len(rad)
    idx = np.arange(len(lat.points))
    tags = {"S": idx[:k], BOUNDARY: idx[-k:]}
    return GridGraph("spherical", lat.points, lat.edges, lat.length, lat.weight, tags, dict(lat.params))

