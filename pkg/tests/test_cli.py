import subprocess
import sys

import pytest

from mpnsch.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from mpnsch.config import render_config, with_overrides
from mpnsch.io import csv_columns, read_csv
from mpnsch.scenarios import scaled, scenario


def write_cfg(tmp_path, cfg, name="run.cfg"):
    path = tmp_path / name
    path.write_text(render_config(cfg))
    return str(path)


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    d = tmp_path / "out"
    monkeypatch.setenv("MPNSCH_OUTDIR", str(d))
    return d


def test_run_small_equilibrium(tmp_path, outdir):
    cfg = with_overrides(scaled(scenario("equilibrium"), nx=8, ny=4, n_steps=3), io={"snapshot_stride": 2})
    assert main(["run", write_cfg(tmp_path, cfg)]) == EXIT_OK
    rows = read_csv(outdir / "diagnostics.csv")
    assert [int(r["step"]) for r in rows] == [1, 2, 3]
    assert list(rows[0]) == csv_columns()
    assert (outdir / "snap_0.vtk").exists() and (outdir / "snap_2.vtk").exists()
    assert not (outdir / "snap_3.vtk").exists()
    assert (outdir / "config.txt").read_text() == render_config(cfg)


def test_huge_step_exits_with_solver_code(tmp_path, outdir, capsys):
    cfg = with_overrides(scaled(scenario("droplet_wall"), nx=16, ny=8, n_steps=1),
                         stepping={"h": 1e4}, init={"flow": 1.0})
    assert main(["run", write_cfg(tmp_path, cfg)]) == EXIT_SOLVER
    assert "PicardDiverged" in capsys.readouterr().err


def test_bad_config_exits_with_config_code(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("physics.c_a = -2\nphysics.c_d = 1\n")
    assert main(["check", str(path)]) == EXIT_CONFIG
    assert "Eringen" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_scenario_subcommand(capsys):
    assert main(["scenario", "spinodal", "--emit-config"]) == EXIT_OK
    assert capsys.readouterr().out == render_config(scenario("spinodal"))
    assert main(["scenario", "nope"]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "micropolar_channel" in err and "deep_quench" in err


def test_check_prints_canonical_config(tmp_path, capsys):
    assert main(["check", write_cfg(tmp_path, scenario("droplet_wall"))]) == EXIT_OK
    assert capsys.readouterr().out == render_config(scenario("droplet_wall"))


def test_sweep_subcommand(tmp_path, outdir, capsys):
    cfg = with_overrides(scaled(scenario("deep_quench"), nx=16, ny=8, n_steps=2), sweep={"thetas": (0.3, 0.1)})
    assert main(["sweep", write_cfg(tmp_path, cfg)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "strictly decreasing: yes" in out
    assert len(read_csv(outdir / "sweep.csv")) == 2


def test_console_entry_point(tmp_path):
    # python -m runs the same main
    res = subprocess.run([sys.executable, "-m", "mpnsch.cli", "scenario", "equilibrium"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout.startswith("equilibrium:")
