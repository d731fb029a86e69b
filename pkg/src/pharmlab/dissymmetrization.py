"""Symmetric structures, the reflection group and the Dis operator.

Everything here acts on the angle ``theta`` of cylindrical coordinates only;
``rho`` and ``x'`` are untouched.

The reflection group of order ``2m`` is generated by the reflections in the
hyperplanes through the half-hyperplanes ``theta = pi k / m``.  A ray at
angle ``theta`` is determined up to the group by its *offset*, the angular
distance to the nearest ray ``theta = 2 pi k / m``, which lies in
``[0, pi/m]``.

:func:`build_dubinin_structure` cuts every chamber (half-lane between a ray
``2 pi k / m`` and a neighbouring reflection line) into bands of offsets and
lays the bands out along the target circle as a continuous offset profile
that vanishes exactly at the target angles.  Adjacent pieces then meet at
rays with equal offsets, which is the gluing condition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import cylindrical_arrays

TWO_PI = 2.0 * np.pi
SCHEMA = "pharmlab.structure/1"


def _wrap(t):
    return np.mod(t, TWO_PI)


def _same_angle(a, b, tol):
    d = np.abs(_wrap(np.asarray(a) - np.asarray(b) + np.pi) - np.pi)
    return d <= tol


def _rotate_xy(X, beta):
    X = np.array(X, dtype=float, copy=True)
    c, s = np.cos(beta), np.sin(beta)
    x, y = X[..., 0].copy(), X[..., 1].copy()
    X[..., 0] = c * x - s * y
    X[..., 1] = s * x + c * y
    return X


# -- the group ------------------------------------------------------------------------


@dataclass(frozen=True)
class ReflectionGroup:
    """Dihedral action ``theta -> sign * theta + shift`` of order ``2m``."""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")

    @property
    def generators(self) -> list[float]:
        """Angles ``pi k / m`` of the mirror half-hyperplanes."""
        return [np.pi * k / self.m for k in range(2 * self.m)]

    def elements(self) -> list[tuple[int, float]]:
        """All ``(sign, shift)`` pairs: m rotations and m reflections."""
        step = TWO_PI / self.m
        return [(1, k * step) for k in range(self.m)] + [(-1, k * step) for k in range(self.m)]

    @staticmethod
    def act(g, theta):
        sign, shift = g
        return _wrap(sign * np.asarray(theta, float) + shift)

    @staticmethod
    def act_points(g, X):
        """The isometry of R^n behind ``g``."""
        sign, shift = g
        X = np.array(X, dtype=float, copy=True)
        if sign < 0:
            X[..., 1] = -X[..., 1]
        return _rotate_xy(X, shift)

    def offset(self, theta):
        """Angular distance to the nearest ray ``2 pi k / m``."""
        step = TWO_PI / self.m
        r = np.mod(np.asarray(theta, float), step)
        return np.minimum(r, step - r)

    def equivalent(self, a, b, tol: float = 1e-9):
        """The group element sending angle ``a`` to ``b``, or None."""
        for g in self.elements():
            if _same_angle(self.act(g, a), b, tol):
                return g
        return None


# -- structures ------------------------------------------------------------------------


@dataclass(frozen=True)
class SymmetricStructure:
    """Closed sectors ``[theta1, theta2]`` with rotation angles ``beta``.

    ``sectors[k] = (start, end)`` with ``start`` in ``[0, 2 pi)`` and
    ``end > start`` (possibly past ``2 pi``).
    """

    m: int
    sectors: np.ndarray
    rotations: np.ndarray
    thetas: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        S = np.asarray(self.sectors, float).reshape(-1, 2)
        b = np.asarray(self.rotations, float).ravel()
        if len(S) != len(b):
            raise ValueError("one rotation per sector")
        if np.any(S[:, 1] <= S[:, 0]):
            raise ValueError("sectors must have positive width")
        object.__setattr__(self, "sectors", S)
        object.__setattr__(self, "rotations", b)
        object.__setattr__(self, "thetas", np.asarray(self.thetas, float).ravel())

    @property
    def N(self) -> int:
        return len(self.sectors)

    @property
    def group(self) -> ReflectionGroup:
        return ReflectionGroup(self.m)

    @property
    def images(self) -> np.ndarray:
        """Sectors ``S_l = alpha_l(P_l)``."""
        S = self.sectors + self.rotations[:, None]
        start = _wrap(S[:, 0])
        return np.stack([start, start + (S[:, 1] - S[:, 0])], axis=1)

    def containing(self, theta, tol: float = 1e-12, images: bool = False) -> list[int]:
        """Indices of the closed sectors containing the angle."""
        S = self.images if images else self.sectors
        rel = _wrap(theta - S[:, 0] + tol) - tol
        return np.flatnonzero(rel <= (S[:, 1] - S[:, 0]) + tol).tolist()

    def dis_angles(self, theta, tol: float = 1e-12) -> np.ndarray:
        """All images of one angle (two for a point on a sector boundary)."""
        ks = self.containing(theta, tol)
        return np.unique(np.round(_wrap(theta + self.rotations[ks]), 14))

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "m": int(self.m),
            "thetas": self.thetas.tolist(),
            "sectors": self.sectors.tolist(),
            "rotations": self.rotations.tolist(),
            "info": self.info,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SymmetricStructure":
        if d.get("schema") != SCHEMA:
            raise ValueError("unsupported structure schema")
        return cls(d["m"], d["sectors"], d["rotations"], d["thetas"], d.get("info", {}))

    def verify(self, probes: int = 1000, step: float = 1e-4, seed: int = 0, n: int = 3,
               tol: float = 1e-9) -> dict:
        """Check aP, bP, aS, bS and ``Dis Lambda*_l = Lambda_l``.

        Returns a dict of booleans plus ``ok``.
        """
        return verify_structure(self, probes=probes, step=step, seed=seed, n=n, tol=tol)


class StructureError(RuntimeError):
    """No verified structure could be produced."""


def _covers(S, step, tol):
    grid = np.arange(0.0, TWO_PI, step)
    hit = np.zeros(len(grid), dtype=bool)
    for a, b in S:
        rel = _wrap(grid - a + tol) - tol
        hit |= rel <= (b - a) + tol
    return bool(hit.all())


def _sector_set_match(S, T, tol):
    """Whether two lists of closed sectors agree as sets."""
    A = np.stack([_wrap(S[:, 0]), S[:, 1] - S[:, 0]], axis=1)
    B = np.stack([_wrap(T[:, 0]), T[:, 1] - T[:, 0]], axis=1)
    used = np.zeros(len(B), dtype=bool)
    for s, w in A:
        hit = np.flatnonzero(~used & _same_angle(B[:, 0], s, tol) & (np.abs(B[:, 1] - w) <= tol))
        if len(hit) == 0:
            return False
        used[hit[0]] = True
    return bool(used.all())


def _shared_rays(a, b, tol):
    """Angles of the boundary rays shared by two closed sectors with disjoint interiors."""
    ends_a = [a[0], a[1]]
    ends_b = [b[0], b[1]]
    out = []
    for x in ends_a:
        for y in ends_b:
            if _same_angle(x, y, tol):
                out.append(float(_wrap(x)))
    return sorted(set(np.round(out, 12)))


def verify_structure(s: SymmetricStructure, probes: int = 1000, step: float = 1e-4, seed: int = 0,
                     n: int = 3, tol: float = 1e-9) -> dict:
    G = s.group
    P = s.sectors
    S = s.images
    width = float(np.sum(P[:, 1] - P[:, 0]))
    res = {}
    res["aP"] = abs(width - TWO_PI) <= 1e-10 and _covers(P, step, tol)
    ok = True
    for sign, shift in G.elements():
        if sign > 0:
            T = P + shift
        else:
            T = np.stack([shift - P[:, 1], shift - P[:, 0]], axis=1)
        ok &= _sector_set_match(P, T, tol)
    res["bP"] = bool(ok)
    res["aS"] = _covers(S, step, tol)
    # interiors of the S_l are disjoint: widths add up to 2 pi and S covers
    res["disjoint"] = abs(float(np.sum(S[:, 1] - S[:, 0])) - TWO_PI) <= 1e-10
    rng = np.random.default_rng(seed)
    bs_ok = True
    pairs = 0
    for l in range(s.N):
        for q in range(l + 1, s.N):
            rays = _shared_rays(S[l], S[q], tol)
            if not rays:
                continue
            pairs += 1
            pre_l = [_wrap(t - s.rotations[l]) for t in rays]
            pre_q = [_wrap(t - s.rotations[q]) for t in rays]
            found = None
            for g in G.elements():
                imgs = G.act(g, pre_l)
                if all(np.any(_same_angle(x, pre_q, tol)) for x in np.atleast_1d(imgs)):
                    found = g
                    break
            if found is None:
                bs_ok = False
                continue
            # probe points on the intersection (rays plus the axis)
            k = len(rays)
            t = np.array(rays)[rng.integers(0, k, probes)]
            rho = rng.uniform(0.0, 3.0, probes)
            rho[: max(1, probes // 50)] = 0.0
            X = np.zeros((probes, n))
            X[:, 0], X[:, 1] = rho * np.cos(t), rho * np.sin(t)
            X[:, 2:] = rng.normal(size=(probes, n - 2))
            Y = G.act_points(found, _rotate_xy(X, -s.rotations[l]))
            # membership in alpha_q^{-1}(S_l & S_q): axis, or a ray in pre_q
            r, th = cylindrical_arrays(Y)
            on = (r <= 1e-9) | np.any(_same_angle(th[:, None], np.array(pre_q)[None, :], 1e-8), axis=1)
            bs_ok &= bool(on.all())
    res["bS"] = bool(bs_ok)
    res["bS_pairs"] = pairs
    dis_ok = True
    for l in range(s.m):
        imgs = s.dis_angles(TWO_PI * l / s.m, tol)
        dis_ok &= len(imgs) > 0 and bool(np.all(_same_angle(imgs, s.thetas[l], 1e-9)))
    res["dis_lambda"] = bool(dis_ok)
    res["ok"] = all(res[k] for k in ("aP", "bP", "aS", "disjoint", "bS", "dis_lambda"))
    return res


# -- construction ----------------------------------------------------------------------


def _bands_continuous(gaps, m):
    """Band widths and crossing counts for arbitrary gaps.

    Gap number j in increasing order crosses bands below j once each way
    and band j ``j + 1`` times, so every band is crossed ``m`` times upward.
    """
    order = np.argsort(gaps, kind="stable")
    w = np.zeros(m)
    S = 0.0
    for j, l in enumerate(order):
        w[j] = max((gaps[l] - 2 * S) / (2 * j + 2), 0.0)
        S += w[j]
    d = np.zeros((m, m), dtype=int)
    for j, l in enumerate(order):
        d[l, :j] = 1
        d[l, j] = j + 1
    keep = w > 1e-14 * np.pi
    return w[keep], d[:, keep]


def _bands_lattice(gaps, m, unit):
    """Unit-width bands with integer crossing counts (greedy fill)."""
    half = gaps / (2 * unit)
    G = np.rint(half).astype(int)
    if np.any(np.abs(half - G) > 1e-9) or np.any(G < 1):
        raise ValueError("gaps must be positive even multiples of the angular step")
    K = int(round(np.pi / (m * unit)))
    if abs(K * unit * m - np.pi) > 1e-9:
        raise ValueError("the angular step must divide pi/m")
    r = G.copy()
    d = np.zeros((m, K), dtype=int)
    for i in range(K):
        alive = np.flatnonzero(r > 0)
        d[alive, i] = 1
        extra = m - len(alive)
        for l in sorted(alive, key=lambda l: (r[l], l)):
            take = min(extra, r[l] - 1)
            d[l, i] += take
            extra -= take
        if extra:
            raise StructureError("lattice band fill failed")
        r -= d[:, i]
    if np.any(r):
        raise StructureError("lattice band fill left budget")
    return np.full(K, unit), d


def _moves(drow):
    """Band moves ``(band, +1 | -1)`` of an excursion with crossing counts ``drow``."""
    top = int(np.max(np.flatnonzero(drow > 0))) + 1 if np.any(drow > 0) else 0
    seq = []

    def exc(i):
        seq.append((i, 1))
        if i + 1 < top:
            exc(i + 1)
        seq.append((i, -1))
        for _ in range(int(drow[i]) - 1):
            seq.append((i, 1))
            seq.append((i, -1))

    exc(0)
    return seq


def _merge(table, s_edges, m):
    """Drop band cuts across which every chamber keeps its rotation.

    ``table[(side, c, band)] = beta``.  A cut is removed in all chambers at
    once so that the set of sectors stays invariant under the group.
    """
    K = len(s_edges) - 1
    lane = TWO_PI / m
    keep = [0]
    for i in range(1, K):
        same = all(_same_angle(table[(sd, c, i - 1)], table[(sd, c, i)], 1e-12)
                   for sd in (1, -1) for c in range(m))
        if not same:
            keep.append(i)
    keep.append(K)
    out = []
    for sd in (1, -1):
        for c in range(m):
            for a, b in zip(keep[:-1], keep[1:]):
                beta = table[(sd, c, a)]
                if sd > 0:
                    src0 = lane * c + s_edges[a]
                else:
                    src0 = lane * c - s_edges[b]
                st = float(_wrap(src0))
                out.append((st, st + (s_edges[b] - s_edges[a]), float(_wrap(beta + np.pi) - np.pi)))
    return sorted(out)


def build_dubinin_structure(thetas, step: float | None = None, verify: bool = True,
                            probes: int = 1000) -> SymmetricStructure:
    """A verified structure with ``Dis {theta = 2 pi l/m} = {theta = thetas[l]}``.

    Parameters
    ----------
    thetas : increasing angles in ``[0, 2 pi)``
    step : optional angular grid step; when given, all sector ends and
        rotation angles are multiples of it (the gaps between targets must
        then be even multiples of ``step``)
    """
    th = np.asarray(thetas, float).ravel()
    m = len(th)
    if m < 1:
        raise ValueError("need at least one angle")
    if np.any(th < 0) or np.any(th >= TWO_PI) or np.any(np.diff(th) <= 0):
        raise ValueError("angles must be increasing in [0, 2 pi)")
    gaps = np.diff(np.append(th, th[0] + TWO_PI))
    if step is None:
        w, d = _bands_continuous(gaps, m)
        method = "bands-continuous"
    else:
        w, d = _bands_lattice(gaps, m, float(step))
        method = "bands-lattice"
    s_edges = np.concatenate([[0.0], np.cumsum(w)])
    s_edges[-1] = np.pi / m
    lane = TWO_PI / m
    K = len(w)
    free_up = [set(range(m)) for _ in range(K)]
    free_dn = [set(range(m)) for _ in range(K)]
    table = {}
    for l in range(m):
        seq = _moves(d[l])
        T = th[l]
        prev = None
        for k_move, (i, sgn) in enumerate(seq):
            pool = free_up[i] if sgn > 0 else free_dn[i]
            if i == 0:
                c = l if sgn > 0 else (l + 1) % m
            elif prev is not None and prev[1] == sgn and prev[0] in pool:
                c = prev[0]
            else:
                nat = l if sgn > 0 else (l + 1) % m
                c = nat if nat in pool else min(pool)
            if c not in pool:
                raise StructureError("chamber assignment failed")
            pool.remove(c)
            if sgn > 0:
                src0 = lane * c + s_edges[i]
            else:
                src0 = lane * c - s_edges[i + 1]
            table[(sgn, c, i)] = T - src0
            T += w[i]
            prev = (c, sgn)
        if not _same_angle(T, th[(l + 1) % m], 1e-9):
            raise StructureError("band layout does not close up")
    merged = _merge(table, s_edges, m)
    S = np.array([(a, b) for a, b, _ in merged])
    beta = np.array([c for _, _, c in merged])
    if step is not None:
        beta = np.round(beta / step) * step
    st = SymmetricStructure(m, S, beta, th, {"method": method, "bands": w.tolist()})
    if verify:
        rep = st.verify(probes=probes)
        if not rep["ok"]:
            raise StructureError(f"construction failed verification: {rep}")
        st.info["verification"] = rep
    return st


def identity_structure(m: int) -> SymmetricStructure:
    """The 2m half-lanes with zero rotations."""
    lane = TWO_PI / m
    S = [(_wrap(lane * k - lane / 2), _wrap(lane * k - lane / 2) + lane / 2) for k in range(m)]
    S += [(lane * k, lane * k + lane / 2) for k in range(m)]
    return SymmetricStructure(m, sorted(S), np.zeros(2 * m), lane * np.arange(m), {"method": "identity"})


# -- Dis -------------------------------------------------------------------------------


def dis_set(A, s: SymmetricStructure, tol: float = 1e-12) -> np.ndarray:
    """Images of the points of ``A`` (boundary points map to every adjacent image).

    Points on the axis are fixed.
    """
    X = np.atleast_2d(np.asarray(A, float))
    r, th = cylindrical_arrays(X)
    out = []
    for x, rr, t in zip(X, r, th):
        if rr <= tol:
            out.append(x)
            continue
        for k in s.containing(t, tol):
            out.append(_rotate_xy(x, s.rotations[k]))
    return np.array(out).reshape(-1, X.shape[1])


def dis_edge_map(graph, s: SymmetricStructure, tol: float = 1e-9) -> np.ndarray:
    """Edge map of Dis on a compatible cylindrical graph.

    Every edge must lie in a single closed sector and its rotated copy must
    be an edge of the graph; the result is a permutation of the edges.
    """
    P = graph.points
    r, th = cylindrical_arrays(P)
    if np.any(r <= tol):
        raise ValueError("graph has nodes on the axis")
    out = np.full(graph.n_edges, -1, dtype=np.int64)
    lookup = graph.edge_lookup()
    from scipy.spatial import cKDTree

    tree = cKDTree(P)
    for k in range(s.N):
        a, b = s.sectors[k]
        rel = _wrap(th - a + 1e-12) - 1e-12
        inside = rel <= (b - a) + 1e-12
        strict = (rel > 1e-9) & (rel < (b - a) - 1e-9)
        e = graph.edges
        sel = inside[e[:, 0]] & inside[e[:, 1]] & (strict[e[:, 0]] | strict[e[:, 1]])
        idx = np.flatnonzero(sel)
        if len(idx) == 0:
            continue
        nodes = np.unique(e[idx].ravel())
        dd, img = tree.query(_rotate_xy(P[nodes], s.rotations[k]), distance_upper_bound=tol)
        if not np.all(np.isfinite(dd)):
            raise ValueError("grid is not invariant under a structure rotation")
        nm = dict(zip(nodes.tolist(), img.tolist()))
        for q in idx.tolist():
            i, j = e[q]
            out[q] = lookup.get((min(nm[i], nm[j]), max(nm[i], nm[j])), -1)
    if np.any(out < 0):
        raise ValueError("grid is incompatible with the structure (an edge crosses a sector boundary)")
    if len(np.unique(out)) != len(out):
        raise ValueError("Dis is not injective on the edges of this grid")
    return out


def dis_family(family, s: SymmetricStructure, edge_map: np.ndarray | None = None):
    """The family ``{Dis gamma}`` as a mapped family on the same graph."""
    from .modulus import MappedFamily

    emap = dis_edge_map(family.graph, s) if edge_map is None else edge_map
    return MappedFamily(family, (emap,))


def transport_density(rho, edge_map) -> np.ndarray:
    """``rho~(Dis e) = rho(e)``: the density carried along with the edges."""
    rho = np.asarray(rho, float)
    out = np.zeros_like(rho)
    out[edge_map] = rho
    return out


def structure_grid_step(m: int, K: int) -> float:
    """Angular step ``pi / (m K)`` of grids compatible with lattice structures."""
    return np.pi / (m * K)


def random_lattice_thetas(m: int, K: int, rng) -> np.ndarray:
    """Random targets whose gaps are even multiples of ``pi / (m K)``.

    The total ``2 m K`` units is split into ``m`` positive even parts.
    """
    step = structure_grid_step(m, K)
    units = m * K  # in pairs of steps
    if m == 1:
        parts = np.array([units])
    else:
        cuts = np.sort(rng.choice(np.arange(1, units), size=m - 1, replace=False))
        parts = np.diff(np.concatenate([[0], cuts, [units]]))
    start = int(rng.integers(0, 2 * K)) * step
    th = start + np.concatenate([[0], np.cumsum(2 * parts[:-1] * step)])
    return np.sort(_wrap(th))

