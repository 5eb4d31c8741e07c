import csv
import json
import math

import pytest
from click.testing import CliRunner

from cgmlab import cli
from cgmlab.umbilic import Candidate


def run(*args):
    return CliRunner().invoke(cli.main, [str(a) for a in args])


def _cylinder_json(tmp_path, x="cos(u)"):
    data = {"name": "cyl", "ambient": "R3",
            "domain": {"u0": 0, "u1": 2 * math.pi, "v0": -1, "v1": 1, "periodic_u": True},
            "components": [x, "sin(u)", "v"], "euler_characteristic": 0}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(data))
    return p


def test_analyze_clifford(tmp_path):
    r = run("analyze", "--builtin", "clifford", "--grid", 256, "--out", tmp_path)
    assert r.exit_code == 0, r.output
    d = json.loads((tmp_path / "umbilic.json").read_text())
    assert d["points"] == [] and d["curves"] == [] and d["unresolved"] == []
    assert d["config"]["seed"] == 0 and d["config"]["grid_n"] == 256
    with open(tmp_path / "fields.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "chart" and len(rows) > 1


def test_analyze_bb(tmp_path):
    r = run("analyze", "--builtin", "bb_annulus", "--grid", 256, "--out", tmp_path)
    assert r.exit_code == 0, r.output
    d = json.loads((tmp_path / "umbilic.json").read_text())
    assert len(d["curves"]) == 1 and d["curves"][0]["geodesic"]
    assert d["bb_tests"][0]["passed"]


def test_analyze_bad_expression(tmp_path):
    p = _cylinder_json(tmp_path, "2 * ** cos(u)")
    r = run("analyze", "--surface", p, "--out", tmp_path)
    assert r.exit_code == 1
    assert "parse error" in r.output and "offset 4" in r.output


def test_analyze_user_surface(tmp_path):
    r = run("analyze", "--surface", _cylinder_json(tmp_path), "--grid", 64, "--out", tmp_path)
    assert r.exit_code == 0, r.output


def test_unresolved_candidates_exit_2(tmp_path, monkeypatch):
    real = cli.detect_surface

    def fake(sp, n, **kw):
        rep = real(sp, n, **kw)
        rep.unresolved.append(Candidate(sp.charts[0].name, 0.1, 0.1, 1, 1e-3, False, "synthetic"))
        return rep

    monkeypatch.setattr(cli, "detect_surface", fake)
    r = run("analyze", "--builtin", "clifford", "--grid", 64, "--out", tmp_path)
    assert r.exit_code == 2


@pytest.mark.parametrize("args", [
    ["--builtin", "clifford", "--surface", "x.json"],
    [],
    ["--builtin", "clifford", "--grid", "8"],
    ["--builtin", "clifford", "--eps-min", "0.3"],
    ["--builtin", "clifford", "--eps-steps", "3"],
    ["--builtin", "clifford", "--params", "R"],
    ["--builtin", "torus_rev", "--params", "R=1,r=2"],
    ["--builtin", "nosuch"],
    ["--surface", "/nonexistent/x.json"],
])
def test_invalid_configs_exit_1(tmp_path, args):
    r = run("analyze", *args, "--out", tmp_path)
    assert r.exit_code == 1, r.output


def test_gauss_bonnet_clifford(tmp_path):
    r = run("gauss-bonnet", "--builtin", "clifford", "--grid", 64, "--out", tmp_path)
    assert r.exit_code == 0, r.output
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["verdict"] == "PASS" and abs(fit["c1"]) < 1e-2 and abs(fit["c0"]) < 1e-2
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["eps", "integral", "boundary_flux", "clipped_area"] and len(rows) == 11


def test_energy_sphere_and_torus(tmp_path):
    r = run("energy", "--builtin", "sphere", "--out", tmp_path)
    assert r.exit_code == 0, r.output
    d = json.loads((tmp_path / "energy.json").read_text())
    assert abs(d["E"]) < 1e-9 and d["W"] == pytest.approx(4 * math.pi, rel=1e-6)
    r = run("energy", "--builtin", "torus_rev", "--params", "R=2", "--params", "r=1", "--out", tmp_path)
    assert r.exit_code == 0
    d = json.loads((tmp_path / "energy.json").read_text())
    assert "not_willmore" in d["flags"] and d["E"] > 0


def test_energy_clifford(tmp_path):
    r = run("energy", "--builtin", "clifford_r3", "--out", tmp_path)
    assert r.exit_code == 0
    d = json.loads((tmp_path / "energy.json").read_text())
    assert d["E"] == pytest.approx(4 * math.pi**2, rel=1e-3)


def test_reports_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / str(k)
        assert run("analyze", "--builtin", "bb_annulus", "--grid", 128, "--out", out).exit_code == 0
        outs.append((out / "umbilic.json").read_bytes())
    assert outs[0] == outs[1]


def test_catalog_and_version():
    r = run("catalog")
    assert r.exit_code == 0
    for name in ("clifford", "bb_annulus", "inverted_catenoid", "torus_rev"):
        assert name in r.output
    assert run("--version").exit_code == 0


def test_selftest_subset():
    r = run("selftest", "--only", 6)
    assert r.exit_code == 0 and "criterion 6 [PASS]" in r.output
