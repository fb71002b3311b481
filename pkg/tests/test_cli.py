import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from alphaharm.cli import ConfigError, main, parse_config


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


ENERGY = """
command = "energy"
alpha = [2.0]
[domain]
kind = "icosphere"
subdivisions = 3
[target]
kind = "sphere"
dim = 2
[map]
kind = "identity"
[tolerances]
energy_expected = 113.09733552923255
"""


def test_energy_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["--config", write(tmp_path, ENERGY), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["schema"] == 1 and rep["passed"]
    assert rep["results"][0]["energy"] == pytest.approx(36 * np.pi, rel=5e-3)
    assert "elapsed_seconds" in rep["timings"]


def test_failing_check_exit_one(tmp_path, capsys):
    cfg = ENERGY.replace("113.09733552923255", "100.0")
    assert main(["--config", write(tmp_path, cfg), "--out", str(tmp_path / "r.json")]) == 1
    assert "energy(alpha=2)" in capsys.readouterr().err


def test_reproducible_reports_are_identical(tmp_path):
    cfg = ENERGY.replace('kind = "identity"', 'kind = "identity"\nperturbation = 0.05') + "\nseed = 7\n"
    cfg = "seed = 7\n" + cfg.replace("\nseed = 7\n", "")
    path = write(tmp_path, cfg)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["--config", path, "--out", str(a), "--reproducible"]) in (0, 1)
    assert main(["--config", path, "--out", str(b), "--reproducible"]) in (0, 1)
    assert a.read_bytes() == b.read_bytes()
    assert "timings" not in json.loads(a.read_text())


def test_perturbation_requires_seed():
    cfg = ENERGY.replace('kind = "identity"', 'kind = "identity"\nperturbation = 0.05')
    with pytest.raises(ConfigError, match="seed"):
        parse_config(cfg)


@pytest.mark.parametrize(
    "text,match",
    [
        (ENERGY + "\nbogus = 1\n", "bogus"),
        (ENERGY.replace('"energy"', '"dance"'), "command"),
        (ENERGY.replace("[2.0]", "[0.5]"), "alpha"),
    ],
)
def test_config_errors(tmp_path, capsys, text, match):
    assert main(["--config", write(tmp_path, text)]) == 2
    assert match in capsys.readouterr().err


def test_malformed_mesh_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.off"
    bad.write_text("OFF\n3 1 0\n0 0 0\n1 0 x\n0 1 0\n3 0 1 2\n")
    cfg = ENERGY.replace('kind = "icosphere"\nsubdivisions = 3', f'kind = "file"\npath = "{bad}"')
    cfg = cfg.replace('kind = "sphere"\ndim = 2', 'kind = "torus"\ndim = 2').replace('"identity"', '"constant"')
    cfg = cfg.replace("energy_expected = 113.09733552923255", "")
    assert main(["--config", write(tmp_path, cfg)]) == 2
    err = capsys.readouterr().err
    assert "bad.off:4" in err


def test_flow_series_csv(tmp_path):
    cfg = f"""
command = "flow"
alpha = 2.0
seed = 3
series = "{tmp_path / 'flow.csv'}"
[domain]
kind = "torus-grid"
n = 8
[target]
kind = "torus"
dim = 2
[map]
kind = "linear"
perturbation = 0.05
[solver]
max_iters = 300
tension_tol = 1e-6
"""
    out = tmp_path / "f.json"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = list(csv.reader(open(tmp_path / "flow.csv")))
    assert rows[0] == ["alpha", "iteration", "energy", "tension_norm"]
    energies = [float(r[2]) for r in rows[1:]]
    assert all(b <= a for a, b in zip(energies, energies[1:]))


def test_stability_matrix_export(tmp_path):
    cfg = f"""
command = "stability"
alpha = 2.0
matrix_output = "{tmp_path / 'A.txt'}"
[domain]
kind = "icosphere"
subdivisions = 1
[target]
kind = "hyperbolic"
dim = 2
[map]
kind = "constant"
[solver]
eigenvalues = 3
"""
    out = tmp_path / "s.json"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["results"][0]["verdict"] == "discretely stable"
    assert (tmp_path / "A.txt").read_text().startswith("# 84 84")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["alpha", "index", "eigenvalue"] and len(rows) == 4


def test_sphere_instability_command(tmp_path):
    cfg = """
command = "sphere-instability"
alpha = [2.0, 1.6]
[domain]
kind = "analytic"
[map]
name = "identity-S3"
params = { n = 12 }
"""
    out = tmp_path / "i.json"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    res = json.loads(out.read_text())["results"]
    assert res[0]["verdict"] == "no certificate"
    assert res[0]["sum"] == pytest.approx(48 * np.pi**2, rel=1e-6)
    assert res[0]["displayed_form"] == pytest.approx(4 * 48 * np.pi**2, rel=1e-6)
    assert res[1]["verdict"] == "UNSTABLE"


def test_command_error_is_failed_check(tmp_path, capsys):
    cfg = """
command = "sphere-instability"
alpha = 2.0
[domain]
kind = "analytic"
[map]
name = "latitude-stretch"
params = { n = 8 }
"""
    out = tmp_path / "e.json"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    assert "not alpha-harmonic" in json.loads(out.read_text())["error"]


def test_console_script(tmp_path):
    path = write(tmp_path, ENERGY)
    proc = subprocess.run([sys.executable, "-m", "alphaharm.cli", "--config", path, "--reproducible"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["command"] == "energy"
    proc = subprocess.run([sys.executable, "-m", "alphaharm.cli", "--config", str(Path(tmp_path) / "missing.toml")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
