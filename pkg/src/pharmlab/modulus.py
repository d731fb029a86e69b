"""Discrete p-modulus of curve families on weighted graphs.

The modulus of a family is ``min sum_e sigma_e rho_e**p`` over densities
``rho >= 0`` with ``sum_{e in gamma} rho_e l_e >= 1`` for every member.

Two solvers are provided.

``paths``
    Constraint generation.  The restricted problem over the active members is
    solved in its dual ``max_{lam >= 0} g(lam)`` by projected Newton, and a
    shortest-path oracle finds the member of least rho-length.
``potential``
    For connector families (all simple paths from a source set to a sink set)
    the modulus equals the discrete capacity
    ``min sum_e sigma_e |u_j - u_i|**p / l_e**p`` with ``u = 0`` on the source
    and ``u = 1`` on the sink, and ``rho = |du| / l`` is admissible by
    telescoping.  A flux built from the optimal potential gives a rigorous
    lower bound.

Both return a certified interval ``[lower, upper]`` for the exact value.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate
from scipy.sparse.csgraph import connected_components, dijkstra

from .geometry import Hyperplane, TWO_PI, angular_hyperplane, reflect
from .grids import GridGraph
from .radii import PExponent, mu_p


class FamilyEmptyError(ValueError):
    """The family has no members (source and sink are not connected)."""


# -- families -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConnectorFamily:
    """All simple paths from ``source`` to ``sink`` that use only ``allowed`` edges."""

    graph: GridGraph
    source: np.ndarray
    sink: np.ndarray
    allowed: np.ndarray | None = None

    def __post_init__(self):
        g = self.graph
        src = np.unique(np.asarray(self._resolve(self.source), dtype=np.int64))
        snk = np.unique(np.asarray(self._resolve(self.sink), dtype=np.int64))
        if len(src) == 0 or len(snk) == 0:
            raise FamilyEmptyError("source or sink set is empty")
        if np.intersect1d(src, snk).size:
            raise ValueError("source and sink overlap; the family contains a point curve")
        allowed = np.ones(g.n_edges, dtype=bool) if self.allowed is None else np.asarray(self.allowed, bool)
        if allowed.shape != (g.n_edges,):
            raise ValueError("allowed must be an edge mask")
        e = np.sort(g.edges[allowed], axis=1)
        if len(np.unique(e, axis=0)) != len(e):
            raise ValueError("connector families need a graph without parallel edges")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "sink", snk)
        object.__setattr__(self, "allowed", allowed)

    def _resolve(self, s):
        return self.graph.tag(s) if isinstance(s, str) else s

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.allowed)


    def _tree(self, w):
        g = self.graph
        idx = np.flatnonzero(self.allowed)
        scale = max(float(np.max(w[idx])) if len(idx) else 1.0, 1e-300)
        eta = 1e-13 * scale
        i, j = g.edges[idx, 0], g.edges[idx, 1]
        data = w[idx] + eta
        N = g.n_nodes
        A = sp.csr_matrix((np.concatenate([data, data]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                          shape=(N, N))
        eid = sp.csr_matrix((np.concatenate([idx, idx]) + 1.0, (np.concatenate([i, j]), np.concatenate([j, i]))),
                            shape=(N, N))
        dist, pred, _ = dijkstra(A, directed=False, indices=self.source, min_only=True,
                                 return_predecessors=True)
        return dist, pred, eid, A, eta

    @staticmethod
    def _trace(end, pred, eid):
        path = []
        v = end
        while pred[v] >= 0:
            u = pred[v]
            path.append(int(eid[u, v]) - 1)
            v = u
        return np.array(path[::-1], dtype=np.int64)

    def cheapest(self, w: np.ndarray):
        """Edge set and weight of a member of least total ``w`` (ties: fewer edges)."""
        dist, pred, eid, A, eta = self._tree(w)
        end = self.sink[np.argmin(dist[self.sink])]
        if not np.isfinite(dist[end]):
            raise FamilyEmptyError("sink is not reachable from source in the allowed region")
        path = self._trace(end, pred, eid)
        # the tie-break shifts lengths; the exact minimum certifies admissibility
        A = A.copy()
        A.data -= eta
        A.data = np.maximum(A.data, 0.0)
        exact = dijkstra(A, directed=False, indices=self.source, min_only=True)
        L = min(float(np.sum(w[path])), float(np.min(exact[self.sink])))
        return path, L

    def candidates(self, w: np.ndarray, bound: float, k: int):
        """Up to ``k`` members of weight below ``bound``, cheapest first.

        One shortest path per sink node, so members found together end at
        different nodes.
        """
        dist, pred, eid, _, _ = self._tree(w)
        d = dist[self.sink]
        order = np.argsort(d, kind="stable")
        out = []
        seen = set()
        for s in order:
            if not d[s] < bound or len(out) >= k:
                break
            path = self._trace(self.sink[s], pred, eid)
            # a path through another sink node contains a shorter member
            key = path.tobytes()
            if key not in seen:
                seen.add(key)
                out.append(path)
        return out

    def initial(self):
        return self.cheapest(self.graph.length.copy())[0]


@dataclass(frozen=True, eq=False)
class PathFamily:
    """An explicit finite family; each member is an edge set."""

    graph: GridGraph
    paths: tuple

    def __post_init__(self):
        ps = []
        seen = set()
        for p in self.paths:
            a = np.unique(np.asarray(p, dtype=np.int64))
            if a.size == 0:
                raise ValueError("empty member")
            if a.min() < 0 or a.max() >= self.graph.n_edges:
                raise ValueError("edge index out of range")
            key = a.tobytes()
            if key not in seen:
                seen.add(key)
                ps.append(a)
        if not ps:
            raise FamilyEmptyError("explicit family has no members")
        object.__setattr__(self, "paths", tuple(ps))

    @property
    def support(self) -> np.ndarray:
        return np.unique(np.concatenate(self.paths))

    def matrix(self) -> sp.csr_matrix:
        rows = np.concatenate([np.full(len(p), k) for k, p in enumerate(self.paths)])
        cols = np.concatenate(self.paths)
        return sp.csr_matrix((np.ones(len(cols)), (rows, cols)), shape=(len(self.paths), self.graph.n_edges))

    def cheapest(self, w):
        vals = self.matrix() @ w
        k = int(np.argmin(vals + 1e-13 * max(float(np.max(vals)), 1e-300) * np.array([len(p) for p in self.paths])))
        return self.paths[k], float(vals[k])

    def initial(self):
        return self.cheapest(self.graph.length.copy())[0]

    def candidates(self, w, bound: float, k: int):
        vals = self.matrix() @ w
        order = np.argsort(vals, kind="stable")[:k]
        return [self.paths[i] for i in order if vals[i] < bound]

    def union(self, other: "PathFamily") -> "PathFamily":
        if other.graph is not self.graph:
            raise ValueError("families live on different graphs")
        return PathFamily(self.graph, self.paths + other.paths)


@dataclass(frozen=True, eq=False)
class MappedFamily:
    """Members ``f_0(gamma) u ... u f_k(gamma)`` for members ``gamma`` of ``base``.

    Each map is an integer array sending base edges to edges of ``graph``;
    images of one member under different maps must be disjoint, which makes
    the rho-length of an image the base rho-length of the pulled-back weights.
    """

    base: object
    maps: tuple
    graph: GridGraph | None = None

    def __post_init__(self):
        g = self.graph if self.graph is not None else self.base.graph
        object.__setattr__(self, "graph", g)
        maps = tuple(np.asarray(m, dtype=np.int64) for m in self.maps)
        sup = self.base.support
        for m in maps:
            if m.shape != (self.base.graph.n_edges,):
                raise ValueError("edge map has the wrong length")
            if np.any(m[sup] < 0):
                raise ValueError("edge map is undefined on part of the family support")
        if len(maps) > 1:
            imgs = np.concatenate([m[sup] for m in maps])
            if len(np.unique(imgs)) != len(imgs):
                raise ValueError("images of the family support under different maps overlap")
        object.__setattr__(self, "maps", maps)

    @property
    def support(self) -> np.ndarray:
        return np.unique(np.concatenate([m[self.base.support] for m in self.maps]))

    def image(self, edges) -> np.ndarray:
        return np.unique(np.concatenate([m[edges] for m in self.maps]))

    def cheapest(self, w):
        edges, _ = self.base.cheapest(self._pull(w))
        img = self.image(edges)
        return img, float(np.sum(w[img]))

    def _pull(self, w):
        pulled = np.zeros(self.base.graph.n_edges)
        sup = self.base.support
        for m in self.maps:
            pulled[sup] += w[m[sup]]
        return pulled

    def candidates(self, w, bound: float, k: int):
        if not hasattr(self.base, "candidates"):
            e, L = self.cheapest(w)
            return [e] if L < bound else []
        return [self.image(e) for e in self.base.candidates(self._pull(w), bound, k)]

    def initial(self):
        return self.image(self.base.initial())


@dataclass
class ModulusResult:
    value: float
    density: np.ndarray
    active_paths: list
    iterations: int
    certified_gap: float
    lower: float
    upper: float
    method: str
    min_length: float = 1.0
    info: dict = field(default_factory=dict)

    @property
    def interval(self) -> tuple[float, float]:
        return self.lower, self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def energy(graph: GridGraph, rho, p: float) -> float:
    return float(np.sum(graph.weight * np.asarray(rho) ** p))


def rho_length(graph: GridGraph, rho, edges) -> float:
    edges = np.asarray(edges, dtype=np.int64)
    return float(np.sum(rho[edges] * graph.length[edges]))


# -- linear algebra -------------------------------------------------------------


def spd_solve(A: sp.spmatrix, b: np.ndarray, rtol: float = 1e-12, direct_limit: int = 60000) -> np.ndarray:
    """Solve a symmetric positive definite sparse system."""
    A = A.tocsr()
    if A.shape[0] == 0:
        return np.zeros(0)
    if A.shape[0] <= direct_limit:
        return spla.splu(A.tocsc()).solve(b)
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=2000)
    x = ml.solve(b, tol=rtol, accel="cg", maxiter=500)
    return np.asarray(x)


# -- potential route --------------------------------------------------------------


def _solve_potential(fam: ConnectorFamily, p: float, rtol: float, max_newton: int):
    g = fam.graph
    eidx = np.flatnonzero(fam.allowed)
    D = g.incidence()[eidx]
    ln, sg = g.length[eidx], g.weight[eidx]
    N = g.n_nodes
    c = sg / ln**p
    # components that hold both a source and a sink node carry the energy
    adj = abs(D.T @ D)
    ncomp, lab = connected_components(adj, directed=False)
    good_labels = np.intersect1d(lab[fam.source], lab[fam.sink])
    if good_labels.size == 0:
        raise FamilyEmptyError("sink is not reachable from source in the allowed region")
    good = np.isin(lab, good_labels)
    fixed = np.zeros(N, dtype=bool)
    fixed[fam.source] = True
    fixed[fam.sink] = True
    free = np.flatnonzero(good & ~fixed)
    u = np.zeros(N)
    u[fam.sink] = 1.0
    live = good[g.edges[eidx, 0]] & good[g.edges[eidx, 1]]
    D, c, ln, sg = D[live], c[live], ln[live], sg[live]
    eidx = eidx[live]
    Df = D[:, free].tocsc()
    x0 = D @ u
    c2 = sg / ln**2
    L2 = (Df.T @ sp.diags(c2) @ Df).tocsr()
    uf = spd_solve(L2, -(Df.T @ (c2 * x0)), rtol)
    iters = 1

    def E(v):
        return float(np.sum(c * np.abs(x0 + Df @ v) ** p))

    if p != 2:
        e_old = E(uf)
        for it in range(max_newton):
            x = x0 + Df @ uf
            a = np.abs(x)
            grad = Df.T @ (p * c * np.sign(x) * a ** (p - 1))
            eps2 = (1e-7 * max(float(a.max()), 1e-300)) ** 2
            hw = p * (p - 1) * c * (a * a + eps2) ** ((p - 2) / 2)
            H = (Df.T @ sp.diags(hw) @ Df).tocsr()
            d = -spd_solve(H, grad, rtol)
            slope = float(grad @ d)
            if slope >= 0:
                break
            t = 1.0
            while True:
                e_new = E(uf + t * d)
                if e_new <= e_old + 1e-4 * t * slope or t < 1e-10:
                    break
                t *= 0.5
            uf = uf + t * d
            iters += 1
            dec = e_old - e_new
            e_old = e_new
            if -slope < 1e-14 * e_new and dec <= 1e-14 * e_new:
                break
    u[free] = uf
    x = x0 + Df @ uf
    rho = np.zeros(g.n_edges)
    rho[eidx] = np.abs(x) / ln
    value = energy(g, rho, p)
    # flux certificate: make the gradient flux divergence free, then use Fenchel
    j = p * c * np.sign(x) * np.abs(x) ** (p - 1)
    r = Df.T @ j
    phi = spd_solve(L2, -r, rtol)
    j = j + c2 * (Df @ phi)
    q = p / (p - 1)
    div = D.T @ j
    flux = float(np.sum(div[fam.sink]))
    lower = flux - float(np.sum((p - 1) * c * (np.abs(j) / (p * c)) ** q))
    return rho, value, u, min(lower, value), iters


# -- constraint generation ------------------------------------------------------------


def _dual_solve(A: sp.csr_matrix, sigma: np.ndarray, p: float, lam: np.ndarray,
                gtol: float = 1e-13, max_iter: int = 500):
    """Maximise ``g(lam) = sum lam - (p-1) sum sigma (z / (p sigma))**q``, ``z = A^T lam``."""
    q = p / (p - 1)
    AT = A.T.tocsr()

    def parts(lmb):
        z = AT @ lmb
        base = np.maximum(z, 0.0) / (p * sigma)
        rho = base ** (1.0 / (p - 1))
        val = float(lmb.sum() - (p - 1) * np.sum(sigma * base**q))
        return z, rho, val

    z, rho, val = parts(lam)
    k = len(lam)
    zscale = float(np.max(np.asarray(A.sum(axis=0)).ravel()))
    for it in range(max_iter):
        grad = 1.0 - A @ rho
        pg = np.where(lam > 0, grad, np.maximum(grad, 0.0))
        if np.max(np.abs(pg)) <= gtol:
            break
        eps = min(1e-6, float(np.max(np.abs(lam - np.maximum(lam + grad, 0.0)))))
        act = (lam <= eps) & (grad < 0)
        fr = np.flatnonzero(~act)
        d = np.zeros(k)
        if fr.size:
            zf = np.maximum(z, 1e-10 * max(float(z.max()), zscale))
            dr = (zf / (p * sigma)) ** (1.0 / (p - 1)) / ((p - 1) * zf)
            Af = A[fr]
            H = (Af @ sp.diags(dr) @ Af.T).toarray()
            mu = 1e-13 * max(float(np.trace(H)) / fr.size, 1e-300)
            try:
                d[fr] = np.linalg.solve(H + mu * np.eye(fr.size), grad[fr])
            except np.linalg.LinAlgError:
                d[fr] = np.linalg.lstsq(H + mu * np.eye(fr.size), grad[fr], rcond=None)[0]
            if not np.all(np.isfinite(d)):
                d[fr] = grad[fr]
        d[act] = -lam[act]
        t = 1.0
        while True:
            new = np.maximum(lam + t * d, 0.0)
            zn, rn, vn = parts(new)
            if vn >= val + 1e-4 * float(grad @ (new - lam)) or t < 1e-12:
                break
            t *= 0.5
        if vn < val:
            # fall back to a projected gradient step
            t = 1.0
            while t > 1e-16:
                new = np.maximum(lam + t * grad, 0.0)
                zn, rn, vn = parts(new)
                if vn > val:
                    break
                t *= 0.5
            if vn <= val:
                break
        lam, z, rho, val = new, zn, rn, vn
    return lam, rho, val, it + 1


def _solve_paths(fam, p: float, tol: float, max_iter: int, batch: int = 16):
    g = fam.graph
    rows = [np.asarray(fam.initial(), dtype=np.int64)]
    lam = np.ones(1)
    it = 0
    rho = np.zeros(g.n_edges)
    lower, L = 0.0, 0.0
    inner_total = 0
    while True:
        it += 1
        sup = np.unique(np.concatenate(rows))
        pos = np.full(g.n_edges, -1)
        pos[sup] = np.arange(len(sup))
        rr = np.concatenate([np.full(len(r), k) for k, r in enumerate(rows)])
        cc = pos[np.concatenate(rows)]
        A = sp.csr_matrix((g.length[sup][cc], (rr, cc)), shape=(len(rows), len(sup)))
        lam, rs, dual, inner = _dual_solve(A, g.weight[sup], p, lam)
        inner_total += inner
        rho = np.zeros(g.n_edges)
        rho[sup] = rs
        lower = max(lower, dual)
        path, L = fam.cheapest(rho * g.length)
        if L >= 1 - tol or it >= max_iter:
            break
        new = fam.candidates(rho * g.length, 1 - tol, batch) if hasattr(fam, "candidates") else []
        if not new:
            new = [path]
        have = {r.tobytes() for r in rows}
        new = [np.asarray(q, dtype=np.int64) for q in new]
        new = [q for q in new if np.unique(q).tobytes() not in have and q.tobytes() not in have]
        if not new:
            new = [np.asarray(path, dtype=np.int64)]
        rows.extend(new)
        lam = np.concatenate([lam, np.zeros(len(new))])
    return rho, rows, lower, L, it, inner_total


def _round_out(lo, hi, rel: float = 1e-12):
    """Widen a certified interval by a floating-point rounding allowance."""
    return lo * (1.0 - rel), hi * (1.0 + rel)


def solve_modulus(family, pe: PExponent | float, tol: float = 1e-6, method: str = "auto",
                  max_iter: int = 5000, max_newton: int = 100) -> ModulusResult:
    """Discrete p-modulus with a certified interval.

    Parameters
    ----------
    family : ConnectorFamily | PathFamily | MappedFamily
    pe : PExponent or the exponent p itself
    tol : admissibility tolerance; the returned density has minimal rho-length
        at least ``1 - tol``
    method : "auto", "paths" or "potential"
    """
    p = pe.p if isinstance(pe, PExponent) else float(pe)
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    if method == "auto":
        method = "potential" if isinstance(family, ConnectorFamily) else "paths"
    g = family.graph
    if method == "potential":
        if not isinstance(family, ConnectorFamily):
            raise ValueError("the potential route needs a connector family")
        rho, value, u, lower, iters = _solve_potential(family, p, 1e-12, max_newton)
        path, L = family.cheapest(rho * g.length)
        upper = value / L**p if L > 0 else np.inf
        lo, hi = _round_out(min(lower, upper), upper)
        return ModulusResult(value, rho, [path], iters, 1.0 - L, lo, hi, "potential", L, {"potential": u})
    if method != "paths":
        raise ValueError(f"unknown method {method!r}")
    rho, rows, lower, L, it, inner = _solve_paths(family, p, tol, max_iter)
    value = energy(g, rho, p)
    upper = value / L**p if L > 0 else np.inf
    lo, hi = _round_out(min(lower, upper), upper)
    return ModulusResult(value, rho, rows, it, 1.0 - L, lo, hi, "paths", L,
                         {"inner_iterations": inner, "converged": L >= 1 - tol})


# -- analytic oracles -----------------------------------------------------------------


def annulus_modulus_analytic(r: float, R: float, pe: PExponent) -> float:
    """Modulus of the curves joining the two spheres of ``{r < |x| < R}``."""
    if not 0 < r < R:
        raise ValueError("need 0 < r < R")
    if np.isinf(R):
        if pe.gamma <= 0:
            return 0.0
        gap = mu_p(r, pe)
    else:
        gap = mu_p(r, pe) - mu_p(R, pe)
    return pe.area * gap ** (1 - pe.p)


def annulus_modulus_quadrature(r: float, R: float, n: int, p: float) -> float:
    """Same quantity by quadrature of the radial extremal density.

    The sphere area comes from the recursion ``w_n = 2 pi w_{n-2} / n``.
    """
    w = {0: 1.0, 1: 2.0}
    for k in range(2, n + 1):
        w[k] = TWO_PI * w[k - 2] / k
    expo = -(n - 1) / (p - 1)
    if np.isinf(R):
        I = integrate.quad(lambda s: s**expo, r, np.inf, epsabs=0, epsrel=1e-13)[0]
    else:
        I = integrate.quad(lambda s: s**expo, r, R, epsabs=0, epsrel=1e-13, limit=200)[0]
    return n * w[n] * I ** (1 - p)


# -- hyperplane null density ------------------------------------------------------------


@dataclass(frozen=True)
class NullDensity:
    """The density equal to ``1/k`` on the hyperplane ``L`` and 0 elsewhere.

    Its p-energy vanishes because ``L`` has zero volume, yet it is admissible
    for every curve meeting ``L`` in length at least ``k``.
    """

    plane: Hyperplane
    k: int
    tol: float = 1e-12

    def __call__(self, X):
        X = np.asarray(X, float)
        on = np.abs(self.plane.signed_distance(X)) <= self.tol
        return np.where(on, 1.0 / self.k, 0.0)

    def overlap(self, polyline) -> float:
        """Length of the part of a polygonal curve that lies in ``L``."""
        P = np.asarray(polyline, float)
        on = np.abs(self.plane.signed_distance(P)) <= self.tol
        seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
        return float(np.sum(seg[on[:-1] & on[1:]]))

    def line_integral(self, polyline) -> float:
        return self.overlap(polyline) / self.k

    def admissible(self, polyline) -> bool:
        return self.line_integral(polyline) >= 1.0

    def energy(self, p: float) -> float:
        return 0.0


def hyperplane_null_density(L: Hyperplane, k: int) -> NullDensity:
    if k < 1:
        raise ValueError("k must be a positive integer")
    return NullDensity(L, int(k))


# -- reflections ------------------------------------------------------------------


def sector_edges(graph: GridGraph, lo: float, hi: float, tol: float = 1e-12) -> np.ndarray:
    """Mask of edges with both endpoints at angles in ``[lo, hi]`` (off the axis)."""
    P = graph.points
    rho = np.hypot(P[:, 0], P[:, 1])
    th = np.mod(np.arctan2(P[:, 1], P[:, 0]), TWO_PI)
    inside = (rho > tol) & (th >= lo - tol) & (th <= hi + tol)
    return inside[graph.edges[:, 0]] & inside[graph.edges[:, 1]]


def reflection_maps(graph: GridGraph, m: int) -> list[np.ndarray]:
    """Edge maps of ``x -> phi_k(... phi_1(x))`` for k = 0..2m-1."""
    n = graph.n
    maps = [np.arange(graph.n_edges)]
    fns = [lambda X: X]
    for k in range(1, 2 * m):
        L = angular_hyperplane(np.pi * k / m, n)
        prev = fns[-1]
        fns.append(lambda X, L=L, prev=prev: reflect(prev(X), L))
        maps.append(graph.edge_map(fns[-1]))
    return maps


def reflect_family(family0, m: int) -> MappedFamily:
    """The family of the symmetric unions of reflected copies of each member."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    g = family0.graph
    inside = sector_edges(g, 0.0, np.pi / m)
    if not np.all(inside[family0.support]):
        raise ValueError("a curve leaves the sector 0 <= theta <= pi/m")
    maps = reflection_maps(g, m)
    for mp in maps:
        if np.any(mp[family0.support] < 0):
            raise ValueError("the grid is not symmetric under the reflection group")
    return MappedFamily(family0, tuple(maps))


# -- property helpers ------------------------------------------------------------------


def simple_paths(graph: GridGraph, source, sink, max_nodes: int = 12, allowed=None) -> PathFamily:
    """Every simple path from ``source`` to ``sink`` by depth-first enumeration."""
    if graph.n_nodes > max_nodes:
        raise ValueError(f"brute force is limited to {max_nodes} nodes")
    allowed = np.ones(graph.n_edges, bool) if allowed is None else np.asarray(allowed, bool)
    src, snk = set(np.atleast_1d(source).tolist()), set(np.atleast_1d(sink).tolist())
    nbrs = {v: [] for v in range(graph.n_nodes)}
    for k, (i, j) in enumerate(graph.edges.tolist()):
        if allowed[k]:
            nbrs[i].append((j, k))
            nbrs[j].append((i, k))
    out = []

    def dfs(v, visited, edges):
        if v in snk:
            out.append(list(edges))
            return
        for w, k in nbrs[v]:
            if w not in visited and w not in src:
                visited.add(w)
                edges.append(k)
                dfs(w, visited, edges)
                edges.pop()
                visited.discard(w)

    for s in sorted(src):
        dfs(s, {s}, [])
    if not out:
        raise FamilyEmptyError("no simple path joins source and sink")
    return PathFamily(graph, tuple(out))


def random_path_family(graph: GridGraph, rng, count: int, steps: int, starts=None) -> PathFamily:
    """``count`` self-avoiding random walks of at most ``steps`` edges."""
    nbrs = [[] for _ in range(graph.n_nodes)]
    for k, (i, j) in enumerate(graph.edges.tolist()):
        nbrs[i].append((j, k))
        nbrs[j].append((i, k))
    starts = np.arange(graph.n_nodes) if starts is None else np.asarray(starts)
    out = []
    while len(out) < count:
        v = int(rng.choice(starts))
        seen, edges = {v}, []
        for _ in range(steps):
            opts = [(w, k) for w, k in nbrs[v] if w not in seen]
            if not opts:
                break
            v, k = opts[int(rng.integers(len(opts)))]
            seen.add(v)
            edges.append(k)
        if edges:
            out.append(edges)
    return PathFamily(graph, tuple(out))


def contains_member(path, family: PathFamily) -> bool:
    s = set(np.asarray(path).tolist())
    return any(set(q.tolist()) <= s for q in family.paths)


@dataclass
class SerialReport:
    p: float
    parts: list
    whole: float
    serial_lhs: float
    serial_rhs: float
    serial_slack: float
    union_value: float
    parallel_sum: float
    parallel_slack: float

    @property
    def holds(self) -> bool:
        return self.serial_slack >= -1e-8 and self.parallel_slack >= -1e-8


def serial_bound_check(families, longer_family, pe, tol: float = 1e-10) -> SerialReport:
    """Check both separated-family rules.

    ``M(whole)^(1/(1-p)) >= sum M(part)^(1/(1-p))`` when every member of the
    whole family contains a member of each part, and
    ``M(union of parts) >= sum M(part)`` for the separated union.
    """
    p = pe.p if isinstance(pe, PExponent) else float(pe)
    sups = [set(f.support.tolist()) for f in families]
    for a, b in itertools.combinations(range(len(sups)), 2):
        if sups[a] & sups[b]:
            raise ValueError("families are not separated (they share edges)")
    if isinstance(longer_family, PathFamily):
        for path in longer_family.paths:
            for f in families:
                if isinstance(f, PathFamily) and not contains_member(path, f):
                    raise ValueError("a member of the longer family misses one of the parts")
    parts = [solve_modulus(f, p, tol, method="paths") for f in families]
    whole = solve_modulus(longer_family, p, tol, method="paths")
    e = 1.0 / (1.0 - p)
    lhs = whole.value**e
    rhs = sum(r.value**e for r in parts)
    union = families[0]
    for f in families[1:]:
        union = union.union(f)
    uv = solve_modulus(union, p, tol, method="paths").value
    ps = sum(r.value for r in parts)
    return SerialReport(p, [r.value for r in parts], whole.value, lhs, rhs, lhs - rhs, uv, ps, uv - ps)


# -- isotropic capacity on simplicial meshes ---------------------------------------------


@dataclass
class CapacityResult:
    value: float
    potential: np.ndarray
    iterations: int
    residual: float


def fe_capacity(mesh, source, sink, p: float, rtol: float = 1e-12, max_newton: int = 100) -> CapacityResult:
    """``min sum_T m_T |grad u_T|**p`` over P1 functions, ``u = 0`` on source, 1 on sink.

    By the identity between the modulus of a connecting family and the
    capacity of its condenser this is a conforming (upper) approximation of
    the modulus, free of the axis bias of the edge energy when ``p != 2``.
    """
    src = mesh.tags[source] if isinstance(source, str) else np.asarray(source)
    snk = mesh.tags[sink] if isinstance(sink, str) else np.asarray(sink)
    if len(src) == 0 or len(snk) == 0:
        raise FamilyEmptyError("source or sink set is empty")
    B = mesh.gradient_operator()
    w = mesh.measure
    N = len(mesh.plane)
    used = np.zeros(N, dtype=bool)
    used[mesh.triangles.ravel()] = True
    fixed = np.zeros(N, dtype=bool)
    fixed[src] = True
    fixed[snk] = True
    free = np.flatnonzero(used & ~fixed)
    u = np.zeros(N)
    u[snk] = 1.0
    Bf = B[:, free].tocsc()
    g0 = B @ u
    T = len(w)
    w2 = np.repeat(w, 2)

    def E(v):
        g = (g0 + Bf @ v).reshape(T, 2)
        return float(np.sum(w * np.einsum("ij,ij->i", g, g) ** (p / 2)))

    # p = 2 start
    K2 = (Bf.T @ sp.diags(w2) @ Bf).tocsr()
    uf = spd_solve(K2, -(Bf.T @ (w2 * g0)), rtol)
    it = 1
    e_old = E(uf)
    if p != 2:
        for it in range(2, max_newton + 2):
            g = (g0 + Bf @ uf).reshape(T, 2)
            a2 = np.einsum("ij,ij->i", g, g)
            eps2 = (1e-7) ** 2 * max(float(a2.max()), 1e-300)
            s = a2 + eps2
            coef = p * w * s ** ((p - 2) / 2)
            grad = Bf.T @ (np.repeat(coef, 2) * g.ravel())
            # Hessian blocks coef (I + (p - 2) g g^T / s)
            blk = coef[:, None, None] * (np.eye(2)[None] + (p - 2) * g[:, :, None] * g[:, None, :] / s[:, None, None])
            rows = np.repeat(np.arange(2 * T).reshape(T, 2), 2, axis=1).reshape(T, 2, 2)
            cols = np.transpose(rows, (0, 2, 1))
            H = sp.csr_matrix((blk.ravel(), (rows.ravel(), cols.ravel())), shape=(2 * T, 2 * T))
            Hf = (Bf.T @ H @ Bf).tocsr()
            d = -spd_solve(Hf, grad, rtol)
            slope = float(grad @ d)
            if slope >= 0:
                break
            t = 1.0
            while True:
                e_new = E(uf + t * d)
                if e_new <= e_old + 1e-4 * t * slope or t < 1e-10:
                    break
                t *= 0.5
            uf = uf + t * d
            dec = e_old - e_new
            e_old = e_new
            if -slope < 1e-14 * e_new and dec <= 1e-14 * e_new:
                break
    u[free] = uf
    g = (g0 + Bf @ uf).reshape(T, 2)
    a2 = np.einsum("ij,ij->i", g, g)
    grad = Bf.T @ (np.repeat(p * w * a2 ** ((p - 2) / 2), 2) * g.ravel()) if p >= 2 else np.zeros(len(free))
    res = float(np.linalg.norm(grad)) / max(e_old, 1e-300)
    return CapacityResult(e_old, u, it, res)
