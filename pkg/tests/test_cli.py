import json
import subprocess
import sys

import numpy as np
import pytest

from fracflow import cli
from fracflow.admm import SolverConfig, solve
from fracflow.exceptions import DivergenceError
from fracflow.microstructure import gen_sphere, phases_to_gamma
from fracflow.voxelio import load_phase_map, save_voxel


def run(argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def sphere_file(tmp_path):
    path = tmp_path / "s.ffvx"
    assert run(["generate", "--kind", "sphere", "--n", 16, "--diameter", 8, "--out", path]) == 0
    return path


def test_generate_sphere_fraction(tmp_path, capsys):
    path = tmp_path / "s.ffvx"
    assert run(["generate", "--kind", "sphere", "--n", 64, "--diameter", 32, "--out", path]) == 0
    out = capsys.readouterr().out
    assert "dims 64 64 64" in out
    frac = load_phase_map(path).fractions()[1]
    assert frac == pytest.approx(0.065, abs=0.002)
    assert f"1: {frac:.6f}" in out


def test_generate_laminate(tmp_path):
    path = tmp_path / "l.ffvx"
    assert run(["generate", "--kind", "laminate", "--n", 32, "--axis", "x", "--layers", "16:0,16:1", "--out", path]) == 0
    pm = load_phase_map(path)
    assert np.all(pm.phases[:16] == 0) and np.all(pm.phases[16:] == 1)


def test_generate_pack_and_capsules(tmp_path, capsys):
    a = tmp_path / "p.ffvx"
    assert run(["generate", "--kind", "spherepack", "--dims", "32,32,1", "--diameter", 6,
                "--count", 5, "--seed", 3, "--out", a]) == 0
    assert "seed 3" in capsys.readouterr().out
    b = tmp_path / "c.ffvx"
    assert run(["generate", "--kind", "capsules", "--n", 24, "--diameter", 2, "--aspect-ratio", 8,
                "--count", 4, "--weights", "1,0,0", "--out", b]) == 0
    assert load_phase_map(b).shape == (24, 24, 24)


def test_generate_missing_out(capsys):
    with pytest.raises(SystemExit) as info:
        run(["generate", "--kind", "sphere", "--n", 8, "--diameter", 4])
    assert info.value.code == 2
    assert "--out" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["--kind", "sphere", "--n", 8],
    ["--kind", "laminate", "--n", 8, "--layers", "3:0,3:1"],
    ["--kind", "laminate", "--n", 8, "--layers", "3-0"],
    ["--kind", "sphere", "--dims", "8,8", "--diameter", 2],
    ["--kind", "spherepack", "--n", 8, "--diameter", 2],
    ["--kind", "sphere", "--n", 8, "--diameter", 20],
])
def test_generate_usage_errors(tmp_path, capsys, argv):
    assert run(["generate", *argv, "--out", tmp_path / "x.ffvx"]) == 2
    assert "error" in capsys.readouterr().err


def test_solve_sphere_bypass(tmp_path, capsys):
    path = tmp_path / "s.ffvx"
    run(["generate", "--kind", "sphere", "--n", 32, "--diameter", 16, "--out", path])
    capsys.readouterr()
    assert run(["solve", "--input", path, "--gamma", "0=1.0,1=10.0", "--normal", "1,0,0",
                "--tol", "1e-4", "--penalty", "bb", "--damping", "0.25"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["gamma_eff"] == pytest.approx(1.0, abs=2e-3)
    assert report["converged"] is True
    assert list(report) == list(cli.REPORT_KEYS)
    assert report["config"]["penalty"] == "barzilai_borwein"


def test_solve_homogeneous_with_unit(tmp_path):
    path = tmp_path / "h.ffvx"
    run(["generate", "--kind", "homogeneous", "--n", 8, "--out", path])
    rep = tmp_path / "r.json"
    assert run(["solve", "--input", path, "--gamma", "0=2.5", "--normal", "0,0,1",
                "--unit", "MPa*um", "--report", rep]) == 0
    report = json.loads(rep.read_text())
    assert abs(report["gamma_eff"] - 2.5) <= 1e-6
    assert report["unit"] == "MPa*um"
    assert isinstance(report["wall_time"], float)


def test_solve_scalar_input(tmp_path, capsys):
    path = tmp_path / "g.ffvx"
    save_voxel(np.full((6, 6, 6), 3.0), path)
    assert run(["solve", "--input", path]) == 0
    assert json.loads(capsys.readouterr().out)["gamma_eff"] == pytest.approx(3.0, abs=1e-6)


def test_solve_exports(sphere_file, tmp_path):
    hist = tmp_path / "h.csv"
    vtk = tmp_path / "f.vtk"
    rep = tmp_path / "r.json"
    assert run(["solve", "--input", sphere_file, "--gamma", "0=1,1=10", "--history", hist,
                "--vtk", vtk, "--report", rep, "--check-every", 5]) == 0
    report = json.loads(rep.read_text())
    rows = hist.read_text().splitlines()
    assert rows[0] == "iteration,residual,rho,objective"
    assert len(rows) - 1 == int(np.ceil(report["iterations"] / 5))
    assert int(rows[1].split(",")[0]) == 5
    text = vtk.read_text()
    for tag in ("DIMENSIONS 17 17 17", "SCALARS crack_indicator double 1",
                "SCALARS v_norm double 1", "VECTORS flow double"):
        assert tag in text


def test_solve_deterministic_reports_identical(sphere_file, tmp_path):
    args = ["solve", "--input", sphere_file, "--gamma", "0=1,1=10", "--deterministic"]
    assert run(args + ["--report", tmp_path / "a.json"]) == 0
    assert run(args + ["--report", tmp_path / "b.json"]) == 0
    a = (tmp_path / "a.json").read_bytes()
    assert a == (tmp_path / "b.json").read_bytes()
    assert json.loads(a)["wall_time"] is None


def test_solve_nonconverged_exits_zero(sphere_file, capsys):
    assert run(["solve", "--input", sphere_file, "--gamma", "0=1,1=10", "--max-iter", 3]) == 0
    assert json.loads(capsys.readouterr().out)["converged"] is False


@pytest.mark.parametrize("extra", [
    [],
    ["--gamma", "0=1"],
    ["--gamma", "0:1,1:2"],
    ["--gamma", "0=1,1=10", "--normal", "0,0,0"],
    ["--gamma", "0=1,1=10", "--damping", "1.5"],
    ["--gamma", "0=1,1=10", "--penalty", "magic"],
])
def test_solve_usage_errors(sphere_file, capsys, extra):
    assert run(["solve", "--input", sphere_file, *extra]) == 2
    assert "fracflow: error" in capsys.readouterr().err


def test_solve_io_errors(tmp_path, sphere_file, capsys):
    assert run(["solve", "--input", tmp_path / "missing.ffvx", "--gamma", "0=1"]) == 3
    raw = sphere_file.read_bytes()
    bad = tmp_path / "bad.ffvx"
    bad.write_bytes(raw[:-7])
    assert run(["solve", "--input", bad, "--gamma", "0=1,1=10"]) == 3
    assert "expected" in capsys.readouterr().err


def test_solve_divergence_exit_code(sphere_file, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise DivergenceError("non-finite iterate", 12)

    monkeypatch.setattr(cli, "solve", boom)
    assert run(["solve", "--input", sphere_file, "--gamma", "0=1,1=10"]) == 4
    assert "iteration 12" in capsys.readouterr().err


def test_sweep_axes_symmetric(tmp_path, capsys):
    path = tmp_path / "s.ffvx"
    run(["generate", "--kind", "sphere", "--dims", "12,12,10", "--diameter", 7, "--center", "6,6,3", "--out", path])
    out = tmp_path / "sweep.csv"
    assert run(["sweep", "--input", path, "--gamma", "0=1,1=10", "--normals", "axes",
                "--tol", "1e-7", "--out", out, "--jobs", 2]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "nx,ny,nz,gamma_eff,iterations,converged,residual"
    gx, gy = (float(line.split(",")[3]) for line in lines[1:3])
    assert gx == pytest.approx(gy, rel=1e-6)
    assert len(lines) == 4


def test_sweep_fibonacci_one_matches_solve(sphere_file, capsys):
    assert run(["sweep", "--input", sphere_file, "--gamma", "0=1,1=10", "--normals", "fibonacci:1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    fields = lines[1].split(",")
    d = [float(x) for x in fields[:3]]
    gamma = phases_to_gamma(gen_sphere(16, 8), {0: 1.0, 1: 10.0})
    assert float(fields[3]) == solve(gamma, d, SolverConfig()).gamma_eff


def test_sweep_bad_normals(sphere_file, capsys):
    assert run(["sweep", "--input", sphere_file, "--gamma", "0=1,1=10", "--normals", "random"]) == 2
    assert run(["sweep", "--input", sphere_file, "--gamma", "0=1,1=10", "--normals", "fibonacci:0"]) == 2


def test_fibonacci_directions():
    d = cli.fibonacci_directions(50)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0)
    assert np.all(d[:, 2] > 0)
    assert abs(d[:, :2].mean(axis=0)).max() < 0.1


def test_module_entry_point(tmp_path):
    path = tmp_path / "h.ffvx"
    proc = subprocess.run([sys.executable, "-m", "fracflow", "generate", "--kind", "homogeneous",
                           "--n", "4", "--out", str(path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "fracflow", "solve", "--input", str(path), "--gamma", "0=2.5",
                           "--normal", "0,0,1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert abs(json.loads(proc.stdout)["gamma_eff"] - 2.5) <= 1e-6
    proc = subprocess.run([sys.executable, "-m", "fracflow", "generate", "--kind", "sphere"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "--out" in proc.stderr
