"""Extremal configurations and numeric checks of the decomposition inequalities.

Every check compares a left side built from the given domains with a right
side built from the extremal ones, as intervals.  Radii come from a closed
form when one applies and from the estimators otherwise; each source and its
error bar is recorded in the report.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .domains import Ball, Cylinder, Domain, Everything, HalfSpace, Intersection, Ring, Rotated, Sector, Side
from .domains import dp_domain
from .estimator import (UnderResolvedError, axis_hints, axisymmetric_axis, boundary_distance,
                        estimate_radius_modulus, estimate_radius_pde)
from .geometry import Hyperplane, as_point, check_same_dim, norm, perpendicular_bisector, reflect
from .grids import BOUNDARY, GridGraph, cartesian_lattice, restrict, uniform_axis
from .moebius import SphereOrPlane, build_psi, separating_hypersphere
from .modulus import ConnectorFamily, solve_modulus
from .radii import DERIVED, ESTIMATE, EXACT, PExponent, mu_p, radius_halfspace_pn

REPORT_SCHEMA = "pharmlab.report/1"
TWO_PI = 2.0 * np.pi


# -- extremal configurations -----------------------------------------------------------


def _symmetric(G: Domain, L: Hyperplane, samples: int = 4000, seed: int = 0, radius: float = 4.0) -> bool:
    rng = np.random.default_rng(seed)
    lo, hi = G.bounds()
    lo = np.where(np.isfinite(lo), lo, -radius)
    hi = np.where(np.isfinite(hi), hi, radius)
    X = rng.uniform(lo, hi, size=(samples, L.normal.size))
    return bool(np.all(G.contains(X) == G.contains(reflect(X, L))))


def extremal_halfspace_pair(a1, a2, G: Domain | None = None):
    """The two sides of the perpendicular bisector of ``[a1, a2]`` (intersected with ``G``)."""
    a1, a2 = as_point(a1), as_point(a2)
    n = check_same_dim(a1, a2)
    if norm(a1 - a2) == 0:
        raise ValueError("a1 and a2 must differ")
    L = perpendicular_bisector(a1, a2)
    if L.signed_distance(a1) < 0:
        L = Hyperplane(-L.normal, -L.offset)
    D1 = HalfSpace(L.normal, L.offset)
    D2 = HalfSpace(-L.normal, -L.offset)
    if G is not None and not isinstance(G, Everything):
        if G.n != n:
            raise ValueError("dimension mismatch")
        if not (G.contains(a1) and G.contains(a2)):
            raise ValueError("a1 and a2 must lie in G")
        if not _symmetric(G, L):
            raise ValueError("G is not symmetric with respect to the bisector of a1, a2")
        D1, D2 = Intersection((G, D1)), Intersection((G, D2))
    return D1, D2


def sector_points(m: int, rho0: float, n: int, thetas=None) -> np.ndarray:
    """Points ``[rho0, theta_l, 0]``; by default ``theta_l = 2 pi l / m``."""
    th = TWO_PI * np.arange(m) / m if thetas is None else np.asarray(thetas, float)
    P = np.zeros((len(th), n))
    P[:, 0], P[:, 1] = rho0 * np.cos(th), rho0 * np.sin(th)
    return P


def _check_g(G, rho0):
    if isinstance(G, Ring):
        lo, hi = G.r1, G.r2
        if G.center is not None and np.any(G.center):
            raise ValueError("the ring must be centred at the origin")
    elif isinstance(G, Cylinder):
        lo, hi = G.rho1, G.rho2
    else:
        raise ValueError("G must be a ring or a cylinder")
    if not lo < rho0 < hi:
        raise ValueError(f"need {lo} < rho0 < {hi}")


def sector_domains(G: Domain, dividers) -> list[Domain]:
    """``G`` cut by the half-hyperplanes ``theta = dividers[l]`` (increasing)."""
    d = np.asarray(dividers, float)
    out = []
    for l in range(len(d)):
        t1 = d[l]
        t2 = d[l + 1] if l + 1 < len(d) else d[0] + TWO_PI
        out.append(Intersection((G, Sector(float(t1), float(t2), G.n))))
    return out


def extremal_sectors(m: int, G: Domain, rho0: float):
    """Points ``a*_l`` and domains ``D*_l`` (sectors of width ``2 pi/m`` about them)."""
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    _check_g(G, rho0)
    pts = sector_points(m, rho0, G.n)
    if m == 1:
        # the whole of G slit along theta = pi
        return pts, [Intersection((G, Sector(-np.pi, np.pi, G.n)))]
    dividers = np.pi * (2 * np.arange(m) - 1) / m
    return pts, sector_domains(G, dividers)


def perturbed_sectors(m: int, G: Domain, delta: float, which: int = 0) -> list[Domain]:
    """Extremal sectors with the divider ``theta = pi (2 which + 1)/m`` moved by ``delta``."""
    dividers = np.pi * (2 * np.arange(m) - 1) / m
    k = (which + 1) % m
    dividers[k] += delta
    if np.any(np.diff(np.append(dividers, dividers[0] + TWO_PI)) <= 0):
        raise ValueError("shift too large; dividers would cross")
    return sector_domains(G, dividers)


def extremal_kufarev_split(a1, a2):
    """Components of the unit ball cut by ``C(a1, a2)``, the i-th containing ``a_i``."""
    a1, a2 = as_point(a1), as_point(a2)
    C = separating_hypersphere(a1, a2)
    s1 = int(np.sign(C.residual(a1)[0]))
    s2 = int(np.sign(C.residual(a2)[0]))
    if s1 == 0 or s2 == 0 or s1 == s2:
        raise ValueError("C(a1, a2) does not separate the points")
    ball = Ball(np.zeros(a1.size), 1.0)
    return Intersection((ball, Side(C, s1))), Intersection((ball, Side(C, s2)))


def dp_extremal_domains(a1, a2, n: int | None = None):
    """The two implicit extremal domains of the harmonic Kufarev problem."""
    a1, a2 = as_point(a1), as_point(a2)
    if n is not None and a1.size != n:
        raise ValueError("dimension mismatch")
    return dp_domain(a1, a2, 1), dp_domain(a1, a2, 2)


def check_disjoint(domains, box=None, per_axis: int | None = None, samples: int = 20000, seed: int = 0) -> dict:
    """Count lattice and random points that belong to two of the domains."""
    n = domains[0].n
    if box is None:
        lo = np.full(n, np.inf)
        hi = np.full(n, -np.inf)
        for D in domains:
            l, h = D.bounds()
            lo, hi = np.minimum(lo, l), np.maximum(hi, h)
        lo = np.where(np.isfinite(lo), lo, -4.0)
        hi = np.where(np.isfinite(hi), hi, 4.0)
    else:
        lo, hi = (np.asarray(b, float) for b in box)
    k = per_axis or max(8, int(round(200000 ** (1.0 / n))))
    axes = [np.linspace(l, h, k) for l, h in zip(lo, hi)]
    X = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    rng = np.random.default_rng(seed)
    X = np.vstack([X, rng.uniform(lo, hi, size=(samples, n))])
    count = np.zeros(len(X), dtype=int)
    for D in domains:
        count += D.contains(X)
    bad = int(np.sum(count > 1))
    return {"points": int(len(X)), "overlaps": bad, "ok": bad == 0}


# -- radii with provenance -------------------------------------------------------------


@dataclass
class LabOptions:
    """Resolution settings for every radius the lab needs."""

    grid_h: float = 1.0 / 16
    pde_h: float = 1.0 / 16
    levels: int = 5
    truncate: float = 64.0
    pde_truncate: float = 8.0
    methods: tuple = ("closed", "modulus", "pde")
    prefer: str = "smallest-error"
    error_check: bool = True
    seed: int = 0


def _closed_form(D, a, pe):
    n, p = pe.n, pe.p
    if isinstance(D, HalfSpace):
        if p == n:
            return radius_halfspace_pn(a, D.plane).value, EXACT, "half-space, p = n"
        if p == 2 and n >= 3:
            return 2.0 * abs(float(D.plane.signed_distance(a))), DERIVED, "half-space by images, p = 2"
    if isinstance(D, Ball) and (p == n or (p == 2 and n >= 3)):
        r = D.radius
        s2 = float(np.dot(a - D.center, a - D.center)) / r**2
        if s2 < 1:
            return r * (1.0 - s2), DERIVED, "ball"
    return None


def lab_radius(D: Domain, a, pe: PExponent, opts: LabOptions | None = None, axis=None) -> dict:
    """Radius of ``D`` at ``a`` with its source and error bar."""
    opts = opts or LabOptions()
    a = as_point(a, pe.n)
    if axis is None and pe.n == 3:
        d, _ = boundary_distance(D, a)
        if np.isfinite(d):
            axis = axisymmetric_axis(D, a, 4 * d, axis_hints(D, a))
    if not D.contains(a):
        raise ValueError("point is not inside its domain")
    cands = []
    if "closed" in opts.methods:
        cf = _closed_form(D, a, pe)
        if cf is not None:
            cands.append({"value": cf[0], "error": 0.0, "source": cf[1], "detail": cf[2]})
    if not cands:
        if "modulus" in opts.methods:
            try:
                e = estimate_radius_modulus(D, a, pe, opts.grid_h, levels=opts.levels, truncate=opts.truncate,
                                            axis=axis, error_check=opts.error_check)
                cands.append({"value": e.value, "error": e.error, "source": ESTIMATE, "detail": "modulus",
                              "grid": e.info.get("grid"), "phi": e.phi_values, "t": e.t_sequence})
            except (UnderResolvedError, ValueError) as exc:
                cands.append({"value": None, "error": None, "source": ESTIMATE, "detail": "modulus",
                              "failure": str(exc)})
        if "pde" in opts.methods and pe.p == 2 and pe.n >= 3:
            e = estimate_radius_pde(D, a, pe.n, opts.pde_h, truncate=opts.pde_truncate,
                                    error_check=opts.error_check)
            c = {"value": e.value, "error": e.error, "source": ESTIMATE, "detail": "pde"}
            if "coarse_value" in e.info:
                c["levels"] = [e.info["raw_value"], e.info["coarse_value"]]
                c["truncation_error"] = e.info.get("truncation_error", 0.0)
            cands.append(c)
    good = [c for c in cands if c.get("value") is not None and np.isfinite(c["error"])]
    if not good:
        raise UnderResolvedError(f"no radius source succeeded: {cands}")
    # two estimate routes must agree: each bar is widened until it covers the other route
    spreads = [max((abs(o["value"] - c["value"]) + o["error"] for o in good
                    if o is not c and o["source"] == ESTIMATE and c["source"] == ESTIMATE), default=0.0)
               for c in good]
    for c, spread in zip(good, spreads):
        if spread > c["error"]:
            c["own_error"] = c["error"]
            c["cross_route_excess"] = spread - c["error"]
            c["error"] = spread
    best = min(good, key=lambda c: c["error"])
    out = dict(best)
    out["alternatives"] = [c for c in cands if c is not best]
    return out


def mu_interval(R: float, err: float, pe: PExponent) -> tuple[float, float, float]:
    """``mu_p`` of the radius and of the ends of its error bar (mu is decreasing)."""
    mid = mu_p(R, pe)
    hi = mu_p(R - err, pe) if R - err > 0 else np.inf
    lo = mu_p(R + err, pe)
    return lo, mid, hi


# -- reports ---------------------------------------------------------------------------


@dataclass
class DecompositionReport:
    check: str
    config: dict
    entries: list
    left: float
    right: float
    left_interval: tuple
    right_interval: tuple
    margin: float
    margin_interval: tuple
    verdict: str
    extra: dict = field(default_factory=dict)
    schema: str = REPORT_SCHEMA

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    @property
    def certified_margin(self) -> float:
        """Lower end of the margin interval; positive means a strict inequality."""
        return self.margin_interval[0]

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if np.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def verdict_from(margin: float, margin_hi: float, rounding: float = 0.0) -> str:
    """``holds`` for a nonnegative margin; ``violated`` only when the whole interval is negative.

    ``rounding`` absorbs floating-point noise in exact (closed-form) margins.
    """
    if margin >= -rounding:
        return "holds"
    if margin_hi >= -rounding:
        return "violated-within-error"
    return "violated"


def _report(check, config, entries, left, right, extra=None, paired=None):
    li, ri = (left[0], left[2]), (right[0], right[2])
    margin = left[1] - right[1]
    mi = (li[0] - ri[1], li[1] - ri[0])
    extra = extra or {}
    if paired is not None:
        extra["unpaired_margin_interval"] = mi
        extra["paired_margin"] = paired
        mi = (paired["value"] - paired["error"], paired["value"] + paired["error"])
    rounding = 1e-12 * max(1.0, abs(left[1]), abs(right[1]))
    return DecompositionReport(check, config, entries, left[1], right[1], li, ri, margin, mi,
                               verdict_from(margin, mi[1], rounding), extra)


def paired_margin(left_terms, right_terms, pe: PExponent):
    """Richardson on the margin itself when every radius has fine and coarse levels.

    ``left_terms``/``right_terms`` are ``(weight, radius entry)`` pairs.  All
    radii come from grids anchored at their points with one step, so their
    discretisation errors largely cancel in the difference; the error bar is
    the fine/coarse change of the margin plus any truncation and cross-route
    terms.
    """
    terms = [(w, r) for w, r in left_terms] + [(-w, r) for w, r in right_terms]
    if not all("levels" in r for _, r in terms):
        return None
    fine = sum(w * mu_p(r["levels"][0], pe) for w, r in terms)
    coarse = sum(w * mu_p(r["levels"][1], pe) for w, r in terms)
    trunc = 0.0
    for w, r in terms:
        R = r["levels"][0]
        t = r.get("truncation_error", 0.0) + r.get("cross_route_excess", 0.0)
        if t:
            trunc += abs(w) * abs(mu_p(R - t, pe) - mu_p(R, pe))
    value = fine + (fine - coarse) / 3.0
    err = abs(fine - coarse) + trunc + 1e-12
    return {"value": value, "error": err, "fine": fine, "coarse": coarse}


def _sum_intervals(ivs):
    return tuple(float(sum(v[k] for v in ivs)) for k in range(3))


def _domain_desc(D):
    try:
        return D.to_dict()
    except TypeError:
        return type(D).__name__


def _opts_desc(opts):
    d = asdict(opts)
    d["methods"] = list(d["methods"])
    return d


def _check_points(domains, points, G=None, samples=4000, seed=0):
    for D, a in zip(domains, points):
        if not D.contains(a):
            raise ValueError("a point does not lie in its domain")
    if G is not None:
        rng = np.random.default_rng(seed)
        for D in domains:
            lo, hi = D.bounds()
            glo, ghi = G.bounds()
            lo = np.where(np.isfinite(lo), lo, np.where(np.isfinite(glo), glo, -4.0))
            hi = np.where(np.isfinite(hi), hi, np.where(np.isfinite(ghi), ghi, 4.0))
            X = rng.uniform(lo, hi, size=(samples, D.n))
            inside = D.contains(X)
            if np.any(inside & ~G.contains(X)):
                raise ValueError("a domain is not contained in G")


# -- two-point decompositions ----------------------------------------------------------


def verify_theorem1(D1: Domain, D2: Domain, a1, a2, pe: PExponent, G: Domain | None = None,
                    opts: LabOptions | None = None, check_overlap: bool = True) -> DecompositionReport:
    """``mu(R(a1,D1)) + mu(R(a2,D2)) >= mu(R(a1,D1*)) + mu(R(a2,D2*))``."""
    opts = opts or LabOptions()
    a1, a2 = as_point(a1, pe.n), as_point(a2, pe.n)
    S1, S2 = extremal_halfspace_pair(a1, a2, G)
    _check_points((D1, D2), (a1, a2), G, seed=opts.seed)
    disj = check_disjoint([D1, D2], seed=opts.seed) if check_overlap else None
    if disj is not None and not disj["ok"]:
        raise ValueError(f"domains overlap at {disj['overlaps']} sample points")
    r1 = lab_radius(D1, a1, pe, opts)
    r2 = lab_radius(D2, a2, pe, opts)
    rs = lab_radius(S1, a1, pe, opts)
    left = _sum_intervals([mu_interval(r1["value"], r1["error"], pe), mu_interval(r2["value"], r2["error"], pe)])
    ms = mu_interval(rs["value"], rs["error"], pe)
    right = _sum_intervals([ms, ms])
    entries = [
        {"role": "D1", "point": a1, "domain": _domain_desc(D1), **r1},
        {"role": "D2", "point": a2, "domain": _domain_desc(D2), **r2},
        {"role": "D1*", "point": a1, "domain": _domain_desc(S1), **rs},
        {"role": "D2*", "point": a2, "domain": _domain_desc(S2), "mirror_of": "D1*", **rs},
    ]
    config = {"n": pe.n, "p": pe.p, "a1": a1, "a2": a2, "G": None if G is None else _domain_desc(G),
              "options": _opts_desc(opts)}
    extra = {"disjointness": disj}
    if pe.p == pe.n and (G is None or isinstance(G, Everything)):
        prod = r1["value"] * r2["value"]
        rel = r1["error"] / r1["value"] + r2["error"] / r2["value"]
        bound = float(norm(a1 - a2) ** 2)
        extra["product"] = {"value": prod, "bound": bound, "relative_error": rel,
                            "holds": bool(prod <= bound * (1 + rel))}
    paired = paired_margin([(1, r1), (1, r2)], [(2, rs)], pe)
    return _report("theorem1", config, entries, left, right, extra, paired)


def verify_lavrentiev(D1, D2, a1, a2, opts: LabOptions | None = None) -> DecompositionReport:
    """The product form ``R(a1,D1) R(a2,D2) <= |a1 - a2|^2`` at ``p = n``."""
    a1 = as_point(a1)
    pe = PExponent(a1.size, a1.size)
    rep = verify_theorem1(D1, D2, a1, a2, pe, None, opts)
    rep.check = "lavrentiev"
    return rep


def _kufarev_star(a1, a2, pe, opts):
    """Radii of the Kufarev split through the half-ball picture.

    psi sends ``D_i*`` onto the half-balls ``B & {+-<c,x> > 0}``, the radius at
    ``+-c`` is the same for both, and ``R(a_i, D_i*) = R(c, H) / |psi'(a_i)|``
    for ``p = n`` (conformal invariance) and ``p = 2`` (Kelvin transform).
    """
    psi = build_psi(a1, a2)
    c = psi.c
    H = Intersection((Ball(np.zeros(pe.n), 1.0), HalfSpace(c, 0.0)))
    rH = lab_radius(H, c, pe, opts, axis=c / norm(c))
    f1, f2 = float(psi.factor(a1)), float(psi.factor(a2))
    out = []
    for f in (f1, f2):
        out.append({"value": rH["value"] / f, "error": rH["error"] / f, "source": rH["source"],
                    "detail": f"half-ball radius {rH['value']:.9g} / |psi'(a)|", "factor": f})
    return out, rH, (f1, f2)


def verify_kufarev(D1, D2, a1, a2, opts: LabOptions | None = None) -> DecompositionReport:
    """``R(a1,D1) R(a2,D2) <= R(a1,D1*) R(a2,D2*)`` at ``p = n``, in mu form."""
    opts = opts or LabOptions()
    a1, a2 = as_point(a1), as_point(a2)
    n = check_same_dim(a1, a2)
    pe = PExponent(n, n)
    ball = Ball(np.zeros(n), 1.0)
    _check_points((D1, D2), (a1, a2), ball, seed=opts.seed)
    disj = check_disjoint([D1, D2], seed=opts.seed)
    if not disj["ok"]:
        raise ValueError("domains overlap")
    S1, S2 = extremal_kufarev_split(a1, a2)
    r1 = lab_radius(D1, a1, pe, opts)
    r2 = lab_radius(D2, a2, pe, opts)
    stars, rH, _ = _kufarev_star(a1, a2, pe, opts)
    left = _sum_intervals([mu_interval(r["value"], r["error"], pe) for r in (r1, r2)])
    right = _sum_intervals([mu_interval(r["value"], r["error"], pe) for r in stars])
    entries = [
        {"role": "D1", "point": a1, "domain": _domain_desc(D1), **r1},
        {"role": "D2", "point": a2, "domain": _domain_desc(D2), **r2},
        {"role": "D1*", "point": a1, "domain": _domain_desc(S1), **stars[0]},
        {"role": "D2*", "point": a2, "domain": _domain_desc(S2), **stars[1]},
    ]
    config = {"n": n, "p": float(n), "a1": a1, "a2": a2, "options": _opts_desc(opts)}
    return _report("kufarev", config, entries, left, right, {"disjointness": disj, "half_ball": rH})


def verify_corollary3(D1, D2, a1, a2, opts: LabOptions | None = None, direct: bool = True) -> DecompositionReport:
    """Weighted harmonic Kufarev inequality, ``p = 2``, ``n >= 3``.

    Each side is ``(|psi'(a1)| R1)^(2-n) + (|psi'(a2)| R2)^(2-n)``.
    """
    opts = opts or LabOptions()
    a1, a2 = as_point(a1), as_point(a2)
    n = check_same_dim(a1, a2)
    if n < 3:
        raise ValueError("needs n >= 3")
    pe = PExponent(n, 2)
    ball = Ball(np.zeros(n), 1.0)
    _check_points((D1, D2), (a1, a2), ball, seed=opts.seed)
    disj = check_disjoint([D1, D2], seed=opts.seed)
    if not disj["ok"]:
        raise ValueError("domains overlap")
    psi = build_psi(a1, a2)
    f = (float(psi.factor(a1)), float(psi.factor(a2)))
    S1, S2 = extremal_kufarev_split(a1, a2)

    def term(r, fk):
        # x -> (fk x)^(2-n) is decreasing
        v = (fk * r["value"]) ** (2 - n)
        hi = (fk * (r["value"] - r["error"])) ** (2 - n) if r["value"] > r["error"] else np.inf
        lo = (fk * (r["value"] + r["error"])) ** (2 - n)
        return lo, v, hi

    r1 = lab_radius(D1, a1, pe, opts)
    r2 = lab_radius(D2, a2, pe, opts)
    stars, rH, _ = _kufarev_star(a1, a2, pe, opts)
    extra = {"disjointness": disj, "half_ball": rH, "factors": f}
    if direct:
        d1 = lab_radius(S1, a1, pe, opts)
        d2 = lab_radius(S2, a2, pe, opts)
        extra["direct_star"] = [d1, d2]
        # the transported and the direct values must agree within their bars
        extra["transport_consistent"] = bool(all(
            abs(d["value"] - s["value"]) <= d["error"] + s["error"] + 1e-12 for d, s in zip((d1, d2), stars)))
    left = _sum_intervals([term(r1, f[0]), term(r2, f[1])])
    right = _sum_intervals([term(stars[0], f[0]), term(stars[1], f[1])])
    entries = [
        {"role": "D1", "point": a1, "domain": _domain_desc(D1), **r1},
        {"role": "D2", "point": a2, "domain": _domain_desc(D2), **r2},
        {"role": "D1*", "point": a1, "domain": _domain_desc(S1), **stars[0]},
        {"role": "D2*", "point": a2, "domain": _domain_desc(S2), **stars[1]},
    ]
    config = {"n": n, "p": 2.0, "a1": a1, "a2": a2, "options": _opts_desc(opts)}
    return _report("corollary3", config, entries, left, right, extra)


# -- sector decompositions --------------------------------------------------------------


def symmetry_identity(D0: Domain, a0, m: int, t: float, pe: PExponent, h: float) -> dict:
    """Compare ``M(Gamma(t, a0*, D0*))`` with twice the modulus of its half family.

    The half family lives on ``0 <= theta <= pi/m`` with the mirror
    ``theta = 0`` free; on a lattice symmetric in ``x2 -> -x2`` this is the
    subgraph ``x2 >= 0`` with in-mirror edges at half weight.
    """
    a0 = as_point(a0, pe.n)
    lo, hi = D0.bounds()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("the identity check needs a bounded domain")
    lat = cartesian_lattice([uniform_axis(l - h, u + h, h, c) for l, u, c in zip(lo, hi, a0)])
    from .geometry import Sphere

    G = restrict(lat, D0, holes=[(Sphere(a0, t), "S")])
    full = solve_modulus(ConnectorFamily(G, "S", BOUNDARY), pe)
    y = G.points[:, 1]
    tol = 1e-9 * max(1.0, h)
    upper = y >= -tol
    e = G.edges
    mask = upper[e[:, 0]] & upper[e[:, 1]]
    mirror = (np.abs(y[e[:, 0]]) <= tol) & (np.abs(y[e[:, 1]]) <= tol)
    w = G.weight.copy()
    w[mirror] *= 0.5
    H = GridGraph(G.kind, G.points, G.edges, G.length, w, dict(G.tags), G.meta)
    src = np.intersect1d(G.tag("S"), np.flatnonzero(upper))
    snk = np.intersect1d(G.tag(BOUNDARY), np.flatnonzero(upper))
    half = solve_modulus(ConnectorFamily(H, src, snk, allowed=mask), pe)
    lo2, hi2 = 2 * half.lower, 2 * half.upper
    return {"full": full.value, "full_interval": (full.lower, full.upper), "twice_half": 2 * half.value,
            "twice_half_interval": (lo2, hi2),
            "relative_difference": abs(full.value - 2 * half.value) / full.value,
            "consistent": bool(max(full.lower, lo2) <= min(full.upper, hi2) * (1 + 1e-9))}


def verify_theorem2(m: int, G: Domain, rho0: float, thetas, domains, pe: PExponent,
                    opts: LabOptions | None = None, identity_t: float | None = None,
                    check_overlap: bool = True) -> DecompositionReport:
    """``sum_l mu(R(a_l, D_l)) >= m mu(R(a*_0, D*_0))`` for points on ``rho = rho0``."""
    opts = opts or LabOptions()
    _check_g(G, rho0)
    if len(domains) != m or len(thetas) != m:
        raise ValueError("need m angles and m domains")
    pts = sector_points(m, rho0, G.n, thetas)
    _check_points(domains, pts, G, seed=opts.seed)
    disj = check_disjoint(list(domains), seed=opts.seed) if check_overlap and m > 1 else None
    if disj is not None and not disj["ok"]:
        raise ValueError(f"domains overlap at {disj['overlaps']} sample points")
    star_pts, star_domains = extremal_sectors(m, G, rho0)
    rs = [lab_radius(D, a, pe, opts) for D, a in zip(domains, pts)]
    r0 = lab_radius(star_domains[0], star_pts[0], pe, opts)
    left = _sum_intervals([mu_interval(r["value"], r["error"], pe) for r in rs])
    m0 = mu_interval(r0["value"], r0["error"], pe)
    right = tuple(m * v for v in m0)
    entries = [{"role": f"D{l}", "point": a, "domain": _domain_desc(D), **r}
               for l, (D, a, r) in enumerate(zip(domains, pts, rs))]
    entries.append({"role": "D0*", "point": star_pts[0], "domain": _domain_desc(star_domains[0]), **r0})
    extra = {"disjointness": disj}
    if identity_t is not None:
        extra["symmetry_identity"] = symmetry_identity(star_domains[0], star_pts[0], m, identity_t, pe,
                                                       opts.pde_h)
    config = {"n": G.n, "p": pe.p, "m": m, "rho0": rho0, "thetas": list(map(float, thetas)),
              "G": _domain_desc(G), "options": _opts_desc(opts)}
    paired = paired_margin([(1, r) for r in rs], [(m, r0)], pe)
    return _report("theorem2", config, entries, left, right, extra, paired)


def rotate_configuration(domains, points, beta: float):
    """Rotate every domain and point by ``beta`` about the ``x'`` axis."""
    from .geometry import rotate

    return [Rotated(D, beta) for D in domains], [rotate(a, beta) for a in points]


def shrink_perturbation(D: Domain, a, factor: float = 0.5) -> Ball:
    """The standard shrink: the ball about ``a`` of radius ``factor * dist(a, dD)``."""
    if not 0 < factor <= 1:
        raise ValueError("factor must lie in (0, 1]")
    d, _ = boundary_distance(D, a)
    return Ball(as_point(a), factor * d)
