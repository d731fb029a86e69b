import json
import subprocess
import sys

import numpy as np
import pytest

from pharmlab import cli, figures, lab


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr().out


def test_radius_closed_form(tmp_path, capsys):
    cfg = {"n": 3, "p": 3, "domain": {"type": "halfspace", "normal": [0, 0, 1], "offset": 0}, "point": [0, 0, 0.25]}
    code, out = run(["radius", write(tmp_path, cfg)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["value"] == pytest.approx(0.5) and doc["source"] == "exact-closed-form"


def test_modulus_annulus(tmp_path, capsys):
    cfg = {"n": 2, "p": 2, "grid_h": 1 / 16, "annulus": {"r": 1, "R": 2}}
    code, out = run(["modulus", write(tmp_path, cfg)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["value"] == pytest.approx(doc["reference"], rel=0.01)


def test_modulus_explicit_graph(tmp_path, capsys):
    cfg = {"p": 2, "n": 2, "graph": {"edges": [[0, 1], [1, 2]], "n_nodes": 3}, "source": [0], "sink": [2]}
    code, out = run(["modulus", write(tmp_path, cfg)], capsys)
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.5, rel=1e-6)


def test_verify_radius_shrink(tmp_path):
    a1, a2 = [0.3, 0, 0], [-0.5, 0.2, 0.1]
    D1, D2 = lab.extremal_halfspace_pair(a1, a2)
    cfg = {"n": 3, "p": 3, "domains": [D1.to_dict(), D2.to_dict()], "points": [a1, a2],
           "perturbation": {"kind": "radius-shrink", "factor": 0.5}}
    out = tmp_path / "rep.json"
    assert cli.main(["verify", "theorem1", write(tmp_path, cfg), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["verdict"] == "holds" and doc["margin_interval"][0] > 0
    assert doc["entries"][0]["domain"]["type"] == "ball"


def test_violation_maps_to_exit_2(tmp_path, monkeypatch):
    rep = lab._report("theorem1", {}, [], (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    assert rep.verdict == "violated"
    monkeypatch.setattr(cli, "run_verify", lambda check, cfg: rep)
    assert cli.main(["verify", "theorem1", write(tmp_path, {}), "-o", str(tmp_path / "x.json")]) == 2


def test_errors_map_to_exit_1(tmp_path):
    assert cli.main(["radius", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["verify", "nonsense", "x.json"]) == 1
    assert cli.main([]) == 1
    bad = {"n": 3, "p": 3, "domain": {"type": "ball", "center": [0, 0, 0], "radius": 1}, "point": [2, 0, 0]}
    assert cli.main(["radius", write(tmp_path, bad)]) == 1


def test_help_exits_cleanly(capsys):
    assert cli.main(["--help"]) == 0
    assert "verify" in capsys.readouterr().out


def test_figure_csv(tmp_path):
    out = tmp_path / "fig.csv"
    png = tmp_path / "fig.png"
    code = cli.main(["figure", "figure1-section", "--a1", "0.5,0,0,0", "--a2", "0.3333333333333333,0,0,0",
                     "--k", "81", "-o", str(out), "--png", str(png)])
    assert code == 0 and png.exists()
    curves = figures.read_csv(out.read_text())
    assert {"dp_boundary", "separating_sphere", "unit_sphere", "points"} <= set(curves)


def test_config_section(tmp_path):
    cfg = {"n": 3, "k": 41, "domains": {"b": {"type": "ball", "center": [0, 0, 0], "radius": 1}}}
    out = tmp_path / "s.csv"
    assert cli.main(["figure", "config-section", write(tmp_path, cfg), "-o", str(out)]) == 0
    P = np.vstack(figures.read_csv(out.read_text())["b"])
    np.testing.assert_allclose(np.linalg.norm(P, axis=1), 1, atol=1e-9)


def test_structure(capsys):
    code, out = run(["structure", "--thetas", "0.3,2.0,4.0"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["verification"]["ok"] and doc["structure"]["m"] == 3


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "pharmlab.cli", "structure", "--thetas", "1.0"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and json.loads(res.stdout)["verification"]["ok"]
