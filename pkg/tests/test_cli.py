import json
import math
import shutil
import subprocess
import sys

import pytest

from conjmap.cli import RunReport, main
from conjmap.conjugate import load_map

CIRCLE_IN_L_Y = [k / 10 for k in range(1, 10)] + [0.316225, 0.324008, 0.327831, 0.329278,
                                                    0.331005, 0.687482]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_modulus_unit_disk(capsys):
    rep = report(capsys, "modulus", "--gallery", "unit-disk", "--p", 12)
    assert rep["modulus"] == pytest.approx(1.0, abs=1e-10)
    assert rep["levels"] == 12 and rep["p"] == 12
    assert rep["factorizations"] == 1
    # rec is recomputed from the two stored moduli
    assert rep["rec"] == abs(rep["modulus"] * rep["conjugate_modulus"] - 1.0)
    assert rep["schema"] == 1
    assert set(rep["timings"]) >= {"mesh", "assemble", "solve"}


def test_modulus_pentagon_ring(capsys):
    rep = report(capsys, "modulus", "--gallery", "disk-in-pentagon", "--r", 0.1)
    assert rep["ring_modulus"] == pytest.approx(2.35372035858745, abs=1e-6)
    assert rep["capacity"] == pytest.approx(2 * math.pi / rep["ring_modulus"], rel=1e-12)


def test_modulus_flower_in_square(capsys):
    rep = report(capsys, "modulus", "--gallery", "flower-in-square")
    assert rep["ring_modulus"] == pytest.approx(0.6669554623348065, abs=1e-6)


def test_annulus_radius_flags(capsys):
    rep = report(capsys, "modulus", "--gallery", "annulus", "--r-in", 0.5, "--p", 8)
    assert rep["ring_modulus"] == pytest.approx(math.log(2.0), abs=1e-8)


def test_report_fields():
    names = set(RunReport.__dataclass_fields__)
    assert names >= {"problem", "p", "levels", "ndof", "modulus", "conjugate_modulus", "rec",
                     "timings", "outputs", "schema", "version"}


def test_map_bundle_round_trip(capsys, tmp_path):
    out = tmp_path / "sq.json"
    rep = report(capsys, "map", "--gallery", "rectangle", "--p", 4, "--out", out)
    assert rep["outputs"] == [str(out)]
    cmap = load_map(out)
    assert cmap.evaluate(0.25 + 0.5j) == pytest.approx(0.25 + 0.5j, abs=1e-12)
    again = tmp_path / "again.json"
    report(capsys, "map", "--gallery", "rectangle", "--p", 4, "--out", again)
    a, b = json.loads(out.read_text()), json.loads(again.read_text())
    assert a["u1"] == b["u1"] and a["u2"] == b["u2"]


def test_map_ring_writes_cut(capsys, tmp_path):
    out = tmp_path / "l.json"
    rep = report(capsys, "map", "--gallery", "circle-in-L", "--out", out)
    assert rep["ring_modulus"] == pytest.approx(1.0935085836560234, abs=1e-6)
    cut = tmp_path / "l.json.cut.csv"
    assert str(cut) in rep["outputs"]
    rows = cut.read_text().splitlines()
    assert rows[0] == "x,y" and len(rows) > 3


def test_grid_from_bundle(capsys, tmp_path):
    bundle = tmp_path / "d.json"
    report(capsys, "map", "--gallery", "unit-disk", "--p", 6, "--out", bundle)
    prefix = tmp_path / "g"
    rep = report(capsys, "grid", "--map", bundle, "--nu", 3, "--nv", 2, "--out", prefix)
    assert rep["warnings"] == []
    csv = (tmp_path / "g.csv").read_text().splitlines()
    assert csv[0] == "which,level,x,y"
    assert {row.split(",")[0] for row in csv[1:]} == {"u1", "u2"}
    assert (tmp_path / "g.svg").read_text().count("data-level") == 5


def test_grid_is_deterministic(capsys, tmp_path):
    for name in ("a", "b"):
        report(capsys, "grid", "--gallery", "unit-disk", "--p", 6, "--nu", 2, "--nv", 2,
               "--out", tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_grid_nonuniform_levels_circle_in_l(capsys, tmp_path):
    prefix = tmp_path / "cl"
    rep = report(capsys, "grid", "--gallery", "circle-in-L", "--levels-u", "0.1,0.5,0.9,0.99",
                 "--levels-v", ",".join(map(repr, CIRCLE_IN_L_Y)), "--out", prefix)
    assert rep["warnings"] == []
    levels = {}
    for row in (tmp_path / "cl.csv").read_text().splitlines()[1:]:
        which, level = row.split(",")[:2]
        levels.setdefault(which, set()).add(float(level))
    assert levels["u2"] == set(CIRCLE_IN_L_Y)
    assert levels["u1"] == {0.1, 0.5, 0.9, 0.99}


def test_grid_boundary_only(capsys, tmp_path):
    prefix = tmp_path / "empty"
    rep = report(capsys, "grid", "--gallery", "rectangle", "--p", 2, "--nu", 0, "--nv", 0,
                 "--out", prefix)
    assert rep["warnings"] == []
    svg = (tmp_path / "empty.svg").read_text()
    assert 'id="boundary"' in svg and "data-level" not in svg
    assert (tmp_path / "empty.csv").read_text() == "which,level,x,y\n"


def test_problem_file_round_trip(capsys, tmp_path):
    path = tmp_path / "flower.json"
    report(capsys, "problem", "--gallery", "flower", "--n", 5, "--out", path)
    rep = report(capsys, "modulus", "--problem", path, "--p", 6)
    assert rep["problem"] == json.loads(path.read_text())["name"]
    assert rep["modulus"] == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("argv", [
    ["modulus", "--gallery", "unit-disk", "--frobnicate"],
    ["modulus", "--gallery", "no-such-domain"],
    ["nonsense"],
])
def test_usage_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


@pytest.mark.parametrize("argv", [
    ["modulus"],
    ["modulus", "--gallery", "disk-in-pentagon", "--r", "1.5"],
    ["modulus", "--gallery", "rectangle", "--p", "0"],
    ["modulus", "--gallery", "rectangle", "--ratio", "1.5"],
    ["modulus", "--gallery", "rectangle", "--problem", "x.json"],
    ["modulus", "--problem", "/nonexistent/problem.json"],
    ["validate", "--only", "tables"],
])
def test_problem_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert "problem error" in err


def test_bad_bundle_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": 99}')
    assert run(capsys, "grid", "--map", bad, "--out", tmp_path / "g")[0] == 2


def test_validate_subset_with_report(capsys, tmp_path):
    path = tmp_path / "v.json"
    code, out, _ = run(capsys, "validate", "--p", 10, "--only", "symmetry", "--report", path)
    assert code == 0
    lines = out.splitlines()
    assert all(line.startswith("PASS") for line in lines[:-1])
    assert lines[-1] == "4 passed, 0 failed"
    rep = json.loads(path.read_text())
    assert rep["command"] == "validate" and len(rep["checks"]) == 4


def test_validate_failure_exit_1(capsys):
    # at p=2 the reciprocal-error gate cannot hold
    code, out, _ = run(capsys, "validate", "--p", 2, "--only", "symmetry")
    assert code == 1
    assert "FAIL" in out


@pytest.mark.skipif(shutil.which("conjmap") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["conjmap", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("conjmap ")
    res = subprocess.run([sys.executable, "-m", "conjmap.cli", "modulus", "--gallery", "rectangle",
                          "--p", "1"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["modulus"] == pytest.approx(1.0)
