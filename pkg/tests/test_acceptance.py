"""Acceptance suite: eleven quantitative checks, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` or directly with
``python3 tests/test_acceptance.py``.  A failing check is reported, never
softened.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from battery import BATTERY, property_slacks  # noqa: E402
from pharmlab import cli, figures, lab  # noqa: E402
from pharmlab.dissymmetrization import (build_dubinin_structure, dis_edge_map, dis_family,  # noqa: E402
                                        random_lattice_thetas, structure_grid_step, verify_structure)
from pharmlab.domains import Ball, HalfSpace, Intersection, Ring, dp_expression  # noqa: E402
from pharmlab.estimator import estimate_radius_modulus, estimate_radius_pde  # noqa: E402
from pharmlab.grids import GridGraph, annulus_graph, cylindrical_lattice  # noqa: E402
from pharmlab.modulus import (ConnectorFamily, annulus_modulus_quadrature, random_path_family,  # noqa: E402
                              reflect_family, sector_edges, solve_modulus)
from pharmlab.moebius import build_psi, separating_hypersphere  # noqa: E402
from pharmlab.radii import PExponent, radius_dihedral_harmonic  # noqa: E402

TWO_PI = 2 * np.pi


def annulus_modulus():
    worst, slowest = 0.0, 0.0
    parts = []
    for n, p in ((2, 2.0), (3, 2.0), (3, 3.0)):
        t = time.time()
        g = annulus_graph(1.0, 2.0, n, 1 / 64)
        res = solve_modulus(ConnectorFamily(g, "S", "dD"), p)
        dt = time.time() - t
        rel = abs(res.value / annulus_modulus_quadrature(1, 2, n, p) - 1)
        worst, slowest = max(worst, rel), max(slowest, dt)
        parts.append(f"({n},{p:g}) {rel:.1e} in {dt:.1f}s")
    return worst <= 0.05 and slowest < 60, "; ".join(parts)


def ball_radius():
    B, o = Ball(np.zeros(3), 1.0), np.zeros(3)
    m2 = estimate_radius_modulus(B, o, PExponent(3, 2), 1 / 32).value
    m3 = estimate_radius_modulus(B, o, PExponent(3, 3), 1 / 32).value
    pde = estimate_radius_pde(B, o, 3, 1 / 32).value
    ok = 0.90 <= m2 <= 1.10 and 0.90 <= m3 <= 1.10 and 0.97 <= pde <= 1.03
    return ok, f"modulus (3,2) {m2:.6f}, (3,3) {m3:.6f}; pde {pde:.6f}"


def dihedral():
    half = np.pi / 4
    W = Intersection((HalfSpace([np.sin(half), -np.cos(half), 0], 0.0),
                      HalfSpace([np.sin(half), np.cos(half), 0], 0.0)))
    est = estimate_radius_pde(W, [1.0, 0, 0], 3, 1 / 16)
    ref = radius_dihedral_harmonic(1.0, 2, PExponent(3, 2)).value
    rel = abs(est.value / ref - 1)
    return rel <= 0.10, f"pde {est.value:.5f} +- {est.error:.1e} vs {ref:.5f} (rel {rel:.1e})"


def reflection_ratio():
    worst = 0.0
    for m in (1, 2, 3):
        lat = cylindrical_lattice(np.linspace(1, 2, 4), 2 * m * 3)
        G = GridGraph("cylindrical", lat.points, lat.edges, lat.length, lat.weight)
        r = np.hypot(G.points[:, 0], G.points[:, 1])
        inside = sector_edges(G, 0, np.pi / m)
        src = [i for i in np.flatnonzero(r < 1.01)
               if np.any(inside[(G.edges[:, 0] == i) | (G.edges[:, 1] == i)])][:1]
        fam0 = ConnectorFamily(G, src, np.flatnonzero(r > 1.99), allowed=inside)
        for p in (1.5, 2.0, 3.0):
            ratio = solve_modulus(reflect_family(fam0, m), p).value / solve_modulus(fam0, p).value
            worst = max(worst, abs(ratio / (2 * m) ** (1 - p) - 1))
    return worst <= 1e-3, f"worst relative deviation {worst:.1e} over m in 1..3, p in (1.5, 2, 3)"


def dis_invariance():
    rng = np.random.default_rng(20240611)
    worst = -np.inf
    for trial in range(10):
        m, K = (1, 2, 3)[trial % 3], 3
        lat = cylindrical_lattice(np.linspace(1, 2, 5), 2 * m * K,
                                  xprime=[np.linspace(0, 1, 3)] if trial % 2 else [], split=True)
        G = GridGraph("cylindrical", lat.points, lat.edges, lat.length, lat.weight)
        s = build_dubinin_structure(random_lattice_thetas(m, K, rng), step=structure_grid_step(m, K))
        fam = random_path_family(G, rng, 40, 12)
        p = (1.5, 2.0, 3.0)[trial % 3]
        a = solve_modulus(fam, p)
        b = solve_modulus(dis_family(fam, s, dis_edge_map(G, s)), p)
        worst = max(worst, abs(a.value - b.value) - (a.width + b.width))
    return worst <= 0, f"max(|dM| - gaps) = {worst:.1e} over 10 families"


def structures():
    rng = np.random.default_rng(3)
    bad = []
    for m in (1, 2, 3):
        for k in range(5):
            th = np.sort(rng.uniform(0, TWO_PI, m))
            s = build_dubinin_structure(th, verify=False)
            rep = verify_structure(s)
            if not rep["ok"]:
                bad.append((m, k, rep))
    return not bad, f"{15 - len(bad)}/15 structures verified (aP, bP, aS, bS, Dis rays)"


def random_pair(rng):
    """Disjoint domains on the two sides of the bisector, each axisymmetric about its point's normal line."""
    a1, a2 = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
    while np.linalg.norm(a1 - a2) < 0.6:
        a2 = rng.uniform(-1, 1, 3)
    nv = (a1 - a2) / np.linalg.norm(a1 - a2)
    mid = 0.5 * (a1 + a2)
    doms = []
    for a, s in ((a1, 1.0), (a2, -1.0)):
        d = abs((a - mid) @ nv)
        off = rng.uniform(0.0, 0.5) * d
        wall = HalfSpace(s * nv, s * nv @ mid + off)
        kind = rng.integers(3)
        if kind == 0:
            D = wall
        elif kind == 1:
            D = Intersection((wall, Ball(a + s * nv * rng.uniform(0, 0.5) * d, rng.uniform(1.5, 3.0) * d)))
        else:
            D = Ball(a, rng.uniform(0.3, 0.95) * (d - off))
        doms.append(D)
    return a1, a2, doms


def lavrentiev():
    rng = np.random.default_rng(7)
    pe = PExponent(3, 3)
    opts = lab.LabOptions(grid_h=1 / 16, methods=("modulus",))
    held = 0
    for _ in range(10):
        a1, a2, (D1, D2) = random_pair(rng)
        held += lab.verify_theorem1(D1, D2, a1, a2, pe, None, opts).extra["product"]["holds"]
    a1, a2 = np.array([0.5, 0, 0]), np.array([-0.5, 0, 0])
    S1, S2 = lab.extremal_halfspace_pair(a1, a2)
    pr = lab.verify_theorem1(S1, S2, a1, a2, pe, None, opts).extra["product"]
    eq = abs(pr["value"] / pr["bound"] - 1)
    return held == 10 and eq <= 0.10, f"{held}/10 pairs hold; half-space pair product/bound - 1 = {eq:.1e}"


def sector_desk_check():
    G = Ring(0.5, 2.0, 3)
    pe = PExponent(3, 2)
    opts = lab.LabOptions(pde_h=1 / 16, methods=("pde",))
    margins = []
    for delta in (0.1, 0.2, 0.4):
        doms = lab.perturbed_sectors(2, G, delta)
        rep = lab.verify_theorem2(2, G, 1.0, [0.0, np.pi], doms, pe, opts)
        margins.append((rep.margin, rep.certified_margin))
    ok = all(c > 0 for _, c in margins) and all(np.diff([m for m, _ in margins]) >= 0)
    return ok, ", ".join(f"delta {d}: {m:.3e} (certified >= {c:.3e})" for d, (m, c) in zip((0.1, 0.2, 0.4), margins))


def psi_and_sphere():
    rng = np.random.default_rng(11)
    e_psi = e_orth = 0.0
    for _ in range(100):
        a1, a2 = (rng.normal(size=3) for _ in range(2))
        a1 *= rng.uniform(0.05, 0.95) / np.linalg.norm(a1)
        a2 *= rng.uniform(0.05, 0.95) / np.linalg.norm(a2)
        psi = build_psi(a1, a2)
        e_psi = max(e_psi, float(np.max(np.abs(psi(a1) + psi(a2)))))
        C = separating_hypersphere(a1, a2)
        if not C.is_plane:
            e_orth = max(e_orth, abs(float(C.sphere.center @ C.sphere.center) - C.sphere.radius**2 - 1))
    return e_psi <= 1e-10 and e_orth <= 1e-9, f"max |psi(a1)+psi(a2)| {e_psi:.1e}; max orthogonality defect {e_orth:.1e}"


def modulus_properties():
    worst = {}
    for seed in BATTERY:
        for k, v in property_slacks(seed).items():
            if k not in ("paths", "p"):
                worst[k] = min(worst.get(k, np.inf), v)
    ok = all(v >= -1e-8 for v in worst.values())
    return ok, "min slack " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())


def figure_section(tmp_dir: Path | None = None):
    import tempfile

    out = Path(tmp_dir or tempfile.mkdtemp()) / "figure1.csv"
    code = cli.main(["figure", "figure1-section", "--a1", "0.5,0,0,0", "--a2", repr(1 / 3) + ",0,0,0",
                     "-o", str(out)])
    curves = figures.read_csv(out.read_text())
    P = np.vstack(curves.get("dp_boundary", [np.zeros((0, 2))]))
    X = np.zeros((len(P), 4))
    X[:, :2] = P
    a1, a2 = np.array([0.5, 0, 0, 0]), np.array([1 / 3, 0, 0, 0])
    worst = float(np.max(np.abs(dp_expression(X, a1, a2)))) if len(P) else np.inf
    arcs = len(curves.get("separating_sphere", []))
    ok = code == 0 and len(P) > 0 and arcs > 0 and worst < 1e-6
    return ok, f"{len(P)} implicit-boundary points (max |expression| {worst:.1e}), {arcs} separating arc(s)"


CHECKS = [
    (1, "annulus modulus", annulus_modulus),
    (2, "ball radius recovery", ball_radius),
    (3, "dihedral closed form", dihedral),
    (4, "reflection scaling", reflection_ratio),
    (5, "Dis invariance", dis_invariance),
    (6, "structure construction", structures),
    (7, "Lavrentiev product", lavrentiev),
    (8, "sector decomposition desk check", sector_desk_check),
    (9, "psi and separating sphere", psi_and_sphere),
    (10, "modulus property battery", modulus_properties),
    (11, "figure section", figure_section),
]


def line(k, name, ok, detail, dt):
    return f"[{'PASS' if ok else 'FAIL'}] {k:2d} {name}: {detail} ({dt:.1f}s)"


@pytest.mark.slow
@pytest.mark.parametrize("k,name,check", CHECKS, ids=[f"{k:02d}-{n.replace(' ', '-')}" for k, n, _ in CHECKS])
def test_acceptance(k, name, check, capsys):
    t = time.time()
    ok, detail = check()
    with capsys.disabled():
        print("\n" + line(k, name, ok, detail, time.time() - t))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for k, name, check in CHECKS:
        t = time.time()
        ok, detail = check()
        failed += not ok
        print(line(k, name, ok, detail, time.time() - t), flush=True)
    sys.exit(1 if failed else 0)
