"""Planar cross-sections of domains as CSV polylines.

Implicit boundaries are found by sign changes along the lines of a square
grid in the section plane, refined by bisection.  Points are then chained
into polylines by nearest neighbours.
"""

from __future__ import annotations

import csv
import io

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .domains import Domain, dp_expression
from .geometry import as_point
from .moebius import separating_hypersphere

DP_TOL = 1e-6


def _embed(U, n, axes=(0, 1), origin=None):
    X = np.zeros((len(U), n)) if origin is None else np.tile(as_point(origin, n), (len(U), 1))
    X[:, axes[0]] = U[:, 0]
    X[:, axes[1]] = U[:, 1]
    return X


def _grid_lines(box, k):
    (x0, y0), (x1, y1) = box
    xs, ys = np.linspace(x0, x1, k), np.linspace(y0, y1, k)
    for y in ys:
        yield np.column_stack([xs, np.full(k, y)])
    for x in xs:
        yield np.column_stack([np.full(k, x), ys])


def zero_crossings(f, box, k: int = 201, valid=None, xtol: float = 1e-14):
    """Zeros of a scalar ``f`` on the 2-D grid lines of ``box``.

    ``valid`` masks out samples (for instance points outside the ball or at a
    pole).  Returns an ``(N, 2)`` array.
    """
    out = []
    for line in _grid_lines(box, k):
        v = f(line)
        ok = np.isfinite(v) if valid is None else valid(line) & np.isfinite(v)
        s = np.sign(v)
        idx = np.flatnonzero(ok[:-1] & ok[1:] & (s[:-1] * s[1:] < 0))
        for i in idx:
            A, B = line[i], line[i + 1]
            g = lambda u: float(f((A + u * (B - A))[None, :])[0])
            u = brentq(g, 0.0, 1.0, xtol=xtol)
            out.append(A + u * (B - A))
    return np.array(out).reshape(-1, 2)


def membership_crossings(D: Domain, n: int, box, k: int = 201, axes=(0, 1), iters: int = 50):
    """Boundary points of ``D`` in a coordinate plane by bisection on membership."""
    out = []
    for line in _grid_lines(box, k):
        inside = D.contains(_embed(line, n, axes))
        idx = np.flatnonzero(inside[:-1] != inside[1:])
        for i in idx:
            A, B, ia = line[i], line[i + 1], inside[i]
            for _ in range(iters):
                M = 0.5 * (A + B)
                if D.contains(_embed(M[None, :], n, axes))[0] == ia:
                    A = M
                else:
                    B = M
            out.append(0.5 * (A + B))
    return np.array(out).reshape(-1, 2)


def chain(points: np.ndarray, gap: float) -> list[np.ndarray]:
    """Order unordered curve samples into polylines; jumps above ``gap`` start a new one."""
    if len(points) == 0:
        return []
    tree = cKDTree(points)
    left = np.ones(len(points), dtype=bool)
    lines = []
    while left.any():
        # start from an end point: the remaining sample farthest from the centroid
        rem = np.flatnonzero(left)
        cur = rem[np.argmax(np.linalg.norm(points[rem] - points[rem].mean(0), axis=1))]
        seq = [cur]
        left[cur] = False
        while True:
            d, j = tree.query(points[cur], k=min(len(points), 16))
            nxt = [(dd, jj) for dd, jj in zip(np.atleast_1d(d), np.atleast_1d(j)) if left[jj]]
            if not nxt:
                rem = np.flatnonzero(left)
                if not len(rem):
                    break
                dd = np.linalg.norm(points[rem] - points[cur], axis=1)
                nxt = [(dd.min(), rem[np.argmin(dd)])]
            dd, jj = nxt[0]
            if dd > gap:
                break
            seq.append(jj)
            left[jj] = False
            cur = jj
        lines.append(points[seq])
    return lines


def circle_arc(center, radius, box_mask=None, count: int = 721):
    """A full circle, split where ``box_mask`` is false."""
    t = np.linspace(0, 2 * np.pi, count)
    P = np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])
    if box_mask is None:
        return [P]
    keep = box_mask(P)
    lines, cur = [], []
    for p, k in zip(P, keep):
        if k:
            cur.append(p)
        elif cur:
            lines.append(np.array(cur))
            cur = []
    if cur:
        lines.append(np.array(cur))
    if len(lines) > 1 and keep[0] and keep[-1]:
        lines[0] = np.vstack([lines.pop(), lines[0]])
    return lines


def figure1_section(a1, a2, k: int = 201) -> dict:
    """The (x1, x2) section of the implicit split and of ``C(a1, a2)`` in the unit ball.

    Returns curves keyed by name (each a list of polylines) and the largest
    ``|expression|`` over the emitted implicit-boundary points.
    """
    a1, a2 = as_point(a1), as_point(a2)
    n = a1.size
    if np.any(a1[2:]) or np.any(a2[2:]):
        raise ValueError("the section plane x3 = ... = 0 must contain a1 and a2")
    box = ((-1.0, -1.0), (1.0, 1.0))
    f = lambda U: dp_expression(_embed(U, n), a1, a2)
    poles = np.vstack([a1[:2], a2[:2]])
    valid = lambda U: (np.einsum("ij,ij->i", U, U) < 1 - 1e-9) & (
        np.min(np.linalg.norm(U[:, None, :] - poles[None], axis=2), axis=1) > 1e-9)
    P = zero_crossings(f, box, k, valid)
    resid = np.abs(f(P)) if len(P) else np.zeros(0)
    P = P[resid < DP_TOL]
    step = 2.0 / (k - 1)
    curves = {"dp_boundary": chain(P, 4 * step)}

    C = separating_hypersphere(a1, a2)
    inside = lambda U: np.einsum("ij,ij->i", U, U) < 1.0
    if C.is_plane:
        nv = C.plane.normal[:2]
        base = nv * C.plane.offset / float(nv @ nv)
        d = np.array([-nv[1], nv[0]]) / np.linalg.norm(nv)
        s = np.linspace(-2, 2, 801)
        L = base + s[:, None] * d
        curves["separating_sphere"] = [L[inside(L)]]
    else:
        c, r = C.sphere.center, C.sphere.radius
        r2 = r**2 - float(np.dot(c[2:], c[2:]))
        curves["separating_sphere"] = circle_arc(c[:2], np.sqrt(max(r2, 0.0)), inside) if r2 > 0 else []
    curves["unit_sphere"] = circle_arc(np.zeros(2), 1.0)
    curves["points"] = [np.vstack([a1[:2], a2[:2]])]
    return {"curves": curves, "max_abs_expression": float(resid[resid < DP_TOL].max()) if len(P) else 0.0,
            "rejected": int(np.sum(resid >= DP_TOL)), "n": n}


def config_section(domains: dict, n: int, box, k: int = 201, axes=(0, 1)) -> dict:
    """Boundary polylines of several domains in the plane spanned by ``axes``."""
    step = max(box[1][0] - box[0][0], box[1][1] - box[0][1]) / (k - 1)
    curves = {}
    for name, D in domains.items():
        P = membership_crossings(D, n, box, k, axes)
        curves[name] = chain(P, 4 * step)
    return {"curves": curves, "n": n}


def to_csv(curves: dict) -> str:
    """Rows ``curve, segment, index, u, v``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve", "segment", "index", "u", "v"])
    for name in curves:
        for s, line in enumerate(curves[name]):
            for i, (u, v) in enumerate(line):
                w.writerow([name, s, i, repr(float(u)), repr(float(v))])
    return buf.getvalue()


def read_csv(text: str) -> dict:
    curves: dict = {}
    for row in csv.DictReader(io.StringIO(text)):
        segs = curves.setdefault(row["curve"], {})
        segs.setdefault(int(row["segment"]), []).append((float(row["u"]), float(row["v"])))
    return {k: [np.array(v[s]) for s in sorted(v)] for k, v in curves.items()}


def plot(curves: dict, path: str, title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 5))
    styles = {"unit_sphere": dict(color="0.4", lw=1), "separating_sphere": dict(color="C1", lw=1.5, ls="--"),
              "dp_boundary": dict(color="C0", lw=1.5)}
    for name, lines in curves.items():
        for j, L in enumerate(lines):
            if name == "points":
                ax.plot(L[:, 0], L[:, 1], "k.", ms=6)
                continue
            ax.plot(L[:, 0], L[:, 1], label=name if j == 0 else None, **styles.get(name, {}))
    ax.set_aspect("equal")
    ax.legend(loc="lower left", fontsize=8)
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
