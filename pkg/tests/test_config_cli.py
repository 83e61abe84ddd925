import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from twomembrane.cli import fmt, main
from twomembrane.config import ConfigError, build_config, load_config, parse_log_base, read_pairs

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

DEVICE = """\
L_m = 1e-3
T_mem = 0.2
mass_kg = 1e-12
omega_m_per_s = 1e6
Q_f = 1e7
Gamma_bn_per_s = 1e5
Gamma_cm_per_s = 1e5
n_index = 2000
m_index = 6000
q01_m = -1e-3
q02_m = 2e-3
"""

RIDGE = DEVICE + """\
n_bath = 1000
Delta_bn_per_s = 4.07e6
Delta_cm_per_s = 2.084e7
c_bn = 24.4871795
c_cm = 405.128205
sweep_x = c_bn
sweep_x_min = 10
sweep_x_max = 60
sweep_x_num = 4
sweep_y = c_cm
sweep_y_min = 300
sweep_y_max = 500
sweep_y_num = 3
"""

ANCHOR = DEVICE + """\
n_bath = 1000
Delta_bn_per_s = 4.2e6
Delta_cm_per_s = 2.09e7
c_bn = 60
c_cm = 386.4
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_fmt():
    assert fmt(0.1) == "0.1"
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(True) == "1" and fmt(False) == "0"
    assert fmt(float("nan")) == "nan" and fmt(float("inf")) == "inf"


def test_log_base_parsing():
    assert parse_log_base("e") == parse_log_base("ln") == pytest.approx(np.e)
    assert parse_log_base("2") == 2.0
    with pytest.raises(ConfigError):
        parse_log_base("1")


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError) as exc:
        build_config(read_pairs(write(tmp_path, RIDGE + "colour = red\nzeta = 1\n")))
    assert exc.value.key == "colour"
    assert main(["steady", "--config", write(tmp_path, RIDGE + "colour = red\n")]) == 2


def test_config_conflicts(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, RIDGE + "bath_temperature_K = 0.1\n"))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, RIDGE + "xi_bn1_per_s = 1\n"))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, RIDGE.replace("n_bath = 1000", "n_bath = lots")))


def test_shipped_configs_load():
    names = sorted(p.name for p in CONFIGS.glob("*.cfg"))
    assert "verify.cfg" in names and len(names) >= 8
    for p in CONFIGS.glob("*.cfg"):
        load_config(str(p))


def test_sweep_csv_is_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, RIDGE)
    outs = []
    for threads in (1, 2, 1):
        out = tmp_path / f"s{threads}{len(outs)}.csv"
        assert main(["sweep", "--config", cfg, "--out", str(out), "--threads", str(threads)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    text = outs[0].decode()
    assert "\r" not in text
    lines = text.strip().split("\n")
    assert lines[0] == "c_bn,c_cm,E_N,stable,n1,n2,S_m,nu12_over_wm"
    assert len(lines) == 1 + 12
    assert lines[1].split(",")[:2] == ["10", "300"]


def test_json_diagnostics_on_stderr(tmp_path, capsys):
    cfg = write(tmp_path, RIDGE)
    assert main(["entangle", "--config", cfg, "--out", str(tmp_path / "v.csv"), "--json-diagnostics"]) == 0
    err = capsys.readouterr().err.strip().splitlines()
    rec = json.loads(err[-1])
    assert rec["exit_code"] == 0 and rec["status"] == "ok"
    rows = (tmp_path / "v.csv").read_text().strip().split("\n")
    assert len(rows) == 9


def test_unstable_point_exits_1(tmp_path, capsys):
    cfg = write(tmp_path, ANCHOR)
    assert main(["entangle", "--config", cfg, "--out", str(tmp_path / "a.csv"), "--json-diagnostics"]) == 1
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["exit_code"] == 1 and rec["status"] == "physics_error"


def test_steady_reports_and_default_output_name(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["steady", "--config", write(tmp_path, RIDGE, "ridge.cfg")]) == 0
    data = json.loads((tmp_path / "ridge_steady.json").read_text())
    assert data["stable"] is True


def test_modes_and_couplings(tmp_path):
    cfg = write(tmp_path, RIDGE)
    assert main(["modes", "--config", cfg, "--out", str(tmp_path / "m.csv")]) == 0
    assert main(["couplings", "--config", cfg, "--out", str(tmp_path / "c.json")]) == 0
    assert (tmp_path / "m.csv").read_text().count("\n") > 6


def test_bad_arguments_exit_2(tmp_path):
    cfg = write(tmp_path, RIDGE)
    assert main(["sweep", "--config", cfg, "--threads", "0"]) == 2
    assert main(["frobnicate", "--config", cfg]) == 2
    assert main(["verify", "--config", cfg]) == 2
    assert main(["verify", "--config", cfg, "--seed", str(2 ** 64)]) == 2
    assert main(["steady", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_verify_is_deterministic_per_seed(tmp_path):
    text = (CONFIGS / "verify.cfg").read_text().replace("verify_duration_settling = 200",
                                                         "verify_duration_settling = 5")
    cfg = write(tmp_path, text)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.json"
        assert main(["verify", "--config", cfg, "--seed", "7", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    out = tmp_path / "c.json"
    assert main(["verify", "--config", cfg, "--seed", "8", "--out", str(out)]) == 0
    assert out.read_bytes() != outs[0]


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, RIDGE + "surprise = 1\n")
    proc = subprocess.run([sys.executable, "-m", "twomembrane.cli", "steady", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "surprise" in proc.stderr
