"""Command line interface: ``pharmlab <command> [config.json]``.

Exit codes: 0 when the verdict holds (or the command has no verdict), 2 when
an inequality is violated beyond its error bar or a structure fails
verification, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import figures, lab
from .dissymmetrization import build_dubinin_structure, verify_structure
from .domains import from_dict
from .grids import annulus_graph, explicit_graph
from .modulus import ConnectorFamily, annulus_modulus_quadrature, solve_modulus
from .radii import PExponent

log = logging.getLogger("pharmlab")

VERIFY_CHECKS = ("theorem1", "theorem2", "lavrentiev", "kufarev", "corollary3")
FIGURES = ("figure1-section", "config-section")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def options(cfg: dict) -> lab.LabOptions:
    o = lab.LabOptions()
    for key in ("grid_h", "pde_h", "levels", "truncate", "pde_truncate", "error_check", "seed"):
        if key in cfg:
            setattr(o, key, type(getattr(o, key))(cfg[key]))
    if "methods" in cfg:
        o.methods = tuple(cfg["methods"])
    return o


def exponent(cfg: dict, n: int | None = None) -> PExponent:
    n = int(cfg.get("n", n or 3))
    return PExponent(n, float(cfg.get("p", n)))


def _points(cfg):
    return [np.asarray(a, float) for a in cfg["points"]]


def _domains(cfg):
    return [from_dict(d) for d in cfg["domains"]]


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(doc) -> str:
    return json.dumps(lab._clean(doc), sort_keys=True, indent=1)


def cmd_radius(cfg, args):
    pe = exponent(cfg)
    D = from_dict(cfg["domain"])
    r = lab.lab_radius(D, np.asarray(cfg["point"], float), pe, options(cfg))
    _emit(_dump({"schema": lab.REPORT_SCHEMA, "check": "radius", "n": pe.n, "p": pe.p, **r}), args.out)
    return 0


def cmd_modulus(cfg, args):
    pe = exponent(cfg)
    if "annulus" in cfg:
        a = cfg["annulus"]
        g = annulus_graph(a["r"], a["R"], pe.n, float(cfg.get("grid_h", 1 / 32)), kind=a.get("kind", "pole"))
        src, snk = "S", "dD"
        reference = annulus_modulus_quadrature(a["r"], a["R"], pe.n, pe.p)
    else:
        gd = cfg["graph"]
        g = explicit_graph(gd["edges"], gd.get("length"), gd.get("weight"), gd.get("n_nodes"))
        src, snk = cfg["source"], cfg["sink"]
        reference = None
    res = solve_modulus(ConnectorFamily(g, src, snk), pe, tol=float(cfg.get("tol", 1e-6)))
    doc = {"schema": lab.REPORT_SCHEMA, "check": "modulus", "value": res.value, "interval": res.interval,
           "method": res.method, "iterations": res.iterations, "reference": reference}
    _emit(_dump(doc), args.out)
    return 0


def run_verify(check: str, cfg: dict) -> lab.DecompositionReport:
    o = options(cfg)
    if check == "theorem1":
        pe = exponent(cfg)
        G = from_dict(cfg["G"]) if cfg.get("G") else None
        D1, D2 = _domains(cfg)
        a1, a2 = _points(cfg)
        pert = cfg.get("perturbation")
        if pert and pert.get("kind") == "radius-shrink":
            D1 = lab.shrink_perturbation(D1, a1, float(pert.get("factor", 0.5)))
        return lab.verify_theorem1(D1, D2, a1, a2, pe, G, o)
    if check == "theorem2":
        pe = exponent(cfg)
        G = from_dict(cfg["G"])
        m, rho0 = int(cfg["m"]), float(cfg["rho0"])
        thetas = cfg.get("thetas", list(2 * np.pi * np.arange(m) / m))
        pert = cfg.get("perturbation")
        if "domains" in cfg:
            domains = _domains(cfg)
        elif pert and pert.get("kind") == "angle-shift":
            domains = lab.perturbed_sectors(m, G, float(pert["delta"]), int(pert.get("which", 0)))
        else:
            domains = lab.extremal_sectors(m, G, rho0)[1]
        return lab.verify_theorem2(m, G, rho0, thetas, domains, pe, o, identity_t=cfg.get("identity_t"))
    D1, D2 = _domains(cfg)
    a1, a2 = _points(cfg)
    if check == "lavrentiev":
        return lab.verify_lavrentiev(D1, D2, a1, a2, o)
    if check == "kufarev":
        return lab.verify_kufarev(D1, D2, a1, a2, o)
    if check == "corollary3":
        return lab.verify_corollary3(D1, D2, a1, a2, o)
    raise ValueError(f"unknown check {check!r}")


def cmd_verify(cfg, args):
    rep = run_verify(args.check, cfg)
    _emit(rep.to_json(), args.out)
    log.info("%s: %s (margin %.3g)", rep.check, rep.verdict, rep.margin)
    return 2 if rep.verdict == "violated" else 0


def _vec(text):
    return np.array([float(v) for v in text.split(",")])


def cmd_figure(cfg, args):
    if args.kind == "figure1-section":
        a1 = _vec(args.a1) if args.a1 else np.asarray(cfg.get("a1", [0.5, 0, 0, 0]), float)
        a2 = _vec(args.a2) if args.a2 else np.asarray(cfg.get("a2", [1 / 3, 0, 0, 0]), float)
        res = figures.figure1_section(a1, a2, k=int(cfg.get("k", args.k)))
        log.info("implicit boundary: max |expression| = %.2e", res["max_abs_expression"])
    else:
        n = int(cfg["n"])
        doms = {name: from_dict(d) for name, d in cfg["domains"].items()}
        box = cfg.get("box", [[-2, -2], [2, 2]])
        res = figures.config_section(doms, n, box, int(cfg.get("k", args.k)), tuple(cfg.get("axes", (0, 1))))
    _emit(figures.to_csv(res["curves"]), args.out)
    if args.png:
        figures.plot(res["curves"], args.png, args.kind)
    return 0


def cmd_structure(cfg, args):
    thetas = cfg.get("thetas") or [float(v) for v in args.thetas.split(",")]
    s = build_dubinin_structure(thetas, step=cfg.get("step"), verify=False)
    checks = verify_structure(s)
    doc = {"schema": s.to_dict()["schema"], "structure": s.to_dict(), "verification": checks}
    _emit(_dump(doc), args.out)
    return 0 if checks["ok"] else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pharmlab", description="p-harmonic radius decomposition lab")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("config", nargs=None if config_required else "?", help="JSON config file or '-'")
        p.add_argument("-o", "--out", help="write output here instead of stdout")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        return p

    common(sub.add_parser("radius", help="radius of one domain at one point"))
    common(sub.add_parser("modulus", help="modulus of one curve family"))
    p = sub.add_parser("verify", help="check one decomposition inequality")
    p.add_argument("check", choices=VERIFY_CHECKS)
    common(p)
    p = sub.add_parser("figure", help="planar sections as CSV polylines")
    p.add_argument("kind", choices=FIGURES)
    common(p, config_required=False)
    p.add_argument("--a1")
    p.add_argument("--a2")
    p.add_argument("--k", type=int, default=201, help="grid lines per axis")
    p.add_argument("--png", help="also draw the section")
    p = sub.add_parser("structure", help="build and verify a dissymmetrization structure")
    common(p, config_required=False)
    p.add_argument("--thetas", help="comma separated angles")
    return ap


COMMANDS = {"radius": cmd_radius, "modulus": cmd_modulus, "verify": cmd_verify, "figure": cmd_figure,
            "structure": cmd_structure}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors must not look like a violated inequality
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except Exception as exc:  # noqa: BLE001 - the exit code carries the failure
        log.error("error: %s", exc)
        if args.verbose:
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())
