import json
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from fermispec.cli import ConfigError, load_config, main
from fermispec.export import read_dispersion_csv, read_envelope_csv
from fermispec.lattice import build_grid

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_cfg(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(*args):
    return main([str(a) for a in args])


def test_overrides_win(tmp_path):
    cfg = load_config(write_cfg(tmp_path, "[physics]\nmu = 2.0\n"), ["physics.mu=3.5"])
    assert cfg.float("physics", "mu") == 3.5
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, ""), ["mu=3"])


def test_missing_config_file(tmp_path, capsys):
    assert run("hull", "--config", tmp_path / "nope.ini") == 2


def test_hull_free_d1(tmp_path):
    assert run("hull", "--config", CONFIGS / "hull_free_d1.ini", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "hull_summary.json").read_text())
    assert summary["gap"] == 0.0
    assert summary["oracle"]["equal"] == {"full": True, "even": True, "odd": True}
    odd = read_envelope_csv(tmp_path / "hull_odd.csv")
    assert odd["values"][np.flatnonzero(odd["momenta"][:, 0] == 1.0)[0]] == 0.0
    for sector in ("full", "even", "odd", "essential_full", "essential_even", "essential_odd"):
        assert (tmp_path / f"hull_{sector}.csv").exists()


def test_hull_model_d2(tmp_path):
    assert run("hull", "--config", CONFIGS / "hull_model_d2.ini", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "hull_summary.json").read_text())
    assert summary["gap"] == 0.5
    assert abs(summary["critical_velocity"] - 0.5) < 0.02


def test_hull_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run("hull", "--config", CONFIGS / "hull_model_d2.ini", "--out", out) == 0
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_hfb_superconducting(tmp_path):
    assert run("hfb", "--config", CONFIGS / "hfb_contact_d1.ini", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "hfb_report.json").read_text())
    assert rep["branch"] == "superconducting" and rep["gap"] > 0
    assert rep["residual"] <= rep["tol"]
    D = read_dispersion_csv(tmp_path / "hfb_D.csv", build_grid(1, 2 * np.pi, 3))
    assert D.values.min() == rep["gap"]
    assert (tmp_path / "hfb_hull_summary.json").exists()


def test_hfb_zero_coupling_is_normal(tmp_path):
    code = run("hfb", "--config", CONFIGS / "hfb_contact_d1.ini", "--out", tmp_path,
               "--override", "physics.g=0")
    assert code == 0
    rep = json.loads((tmp_path / "hfb_report.json").read_text())
    assert rep["branch"] == "normal"
    tau = np.array([8, 3, 0, -1, 0, 3, 8], dtype=float)
    np.testing.assert_array_equal([row[-1] for row in rep["D"]], np.abs(tau))


def test_hfb_rejects_zero_damping(tmp_path):
    assert run("hfb", "--config", CONFIGS / "hfb_contact_d1.ini", "--out", tmp_path,
               "--override", "solver.damping=0") == 2


def test_hfb_unconverged_exit_code(tmp_path):
    assert run("hfb", "--config", CONFIGS / "hfb_contact_d1.ini", "--out", tmp_path,
               "--override", "solver.max_iter=2") == 3
    rep = json.loads((tmp_path / "hfb_report.json").read_text())
    assert rep["converged"] is False and rep["residual"] > 0


def test_missing_potential_table(tmp_path, capsys):
    missing = tmp_path / "vhat_table.csv"
    code = run("hfb", "--config", CONFIGS / "hfb_contact_d1.ini", "--out", tmp_path,
               "--override", "physics.potential=table", "--override", f"physics.table={missing}")
    assert code == 2
    assert str(missing) in capsys.readouterr().err


def test_potential_table(tmp_path):
    table = tmp_path / "vhat.csv"
    q = np.linspace(0, 10, 101)
    rows = "\n".join(f"{float(x)!r},{float(-2.0 * np.exp(-x * x))!r}" for x in q)
    table.write_text("q,vhat\n" + rows + "\n")
    code = run("hfb", "--config", CONFIGS / "hfb_contact_d1.ini", "--out", tmp_path,
               "--override", "physics.potential=table", "--override", f"physics.table={table}")
    assert code == 0


def test_exact_free_three_modes(tmp_path):
    code = run("exact", "--config", CONFIGS / "exact_three_modes.ini", "--out", tmp_path,
               "--override", "physics.g=0", "--override", "physics.mu=1")
    assert code == 0
    s = json.loads((tmp_path / "exact_summary.json").read_text())
    assert s["ground_energy"] == -2.0
    assert s["bounds"]["ground_holds"] and abs(s["bounds"]["ground_margin"]) <= 1e-12
    odd = read_envelope_csv(tmp_path / "exact_odd.csv")
    np.testing.assert_array_equal(odd["values"], [0.0, 1.0, 0.0])


def test_exact_attractive_three_modes(tmp_path):
    assert run("exact", "--config", CONFIGS / "exact_three_modes.ini", "--out", tmp_path) == 0
    s = json.loads((tmp_path / "exact_summary.json").read_text())
    # the free value is 2 tau(0) = -1
    assert s["ground_energy"] < -1.0
    assert s["bounds"]["ground_holds"] and s["bounds"]["ground_margin"] > 0
    assert all(row["holds"] and row["margin"] >= 0 for row in s["bounds"]["odd"])


def test_exact_guard(tmp_path, capsys):
    code = run("exact", "--config", CONFIGS / "exact_three_modes.ini", "--out", tmp_path,
               "--override", "grid.cutoff=9")
    assert code == 4
    assert "38 bits" in capsys.readouterr().err


def test_figures(tmp_path):
    assert run("figures", "--config", CONFIGS / "figures.ini", "--out", tmp_path) == 0
    files = sorted(tmp_path.glob("*.svg"))
    assert len(files) == 10
    for f in files:
        root = ET.parse(f).getroot()
        assert root.findall(".//{http://www.w3.org/2000/svg}rect")


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fermispec.cli", "hull", "--config",
                           str(CONFIGS / "hull_free_d1.ini"), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "gap 0.0" in proc.stdout
