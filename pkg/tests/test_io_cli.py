import json
from pathlib import Path

import numpy as np
import pytest

from zaklab import cli
from zaklab import io as zio
from zaklab.evolve import GridSpec, ICSpec, SimConfig
from zaklab.profiles import find_profile_3d

QUICK = """\
[run]
dim = 2
dt = 0.01
t_end = 0.2
output_every = 0.05
snapshot_every = 2
m_values = 4

[grid]
kind = radial
extent = 10
M = 128

[ic]
family = gaussian
amplitude = 1.0
width = 1.0
n_mode = minus_psi2
"""


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("ZAK_OUT_DIR", str(tmp_path / "out"))
    return tmp_path / "out"


def test_config_parse_and_round_trip():
    cfg = zio.parse_config_text(QUICK)
    assert cfg.dim == 2 and cfg.grid.M == 128 and cfg.m_values == (4.0,)
    assert cfg.ic.params["n_mode"] == "minus_psi2"
    again = zio.parse_config_text(zio.config_to_text(cfg))
    assert again.digest() == cfg.digest()


@pytest.mark.parametrize("text", [
    QUICK.replace("dt = 0.01", "dt = 0.01\nbogus = 1"),
    QUICK.replace("[grid]", "[mesh]"),
    QUICK.replace("dt = 0.01", "dt = -1"),
    QUICK.replace("dt = 0.01", "dt = fast"),
    QUICK.replace("family = gaussian", "family = comet"),
    "no sections at all",
])
def test_config_rejects_bad_input(text):
    with pytest.raises(zio.ConfigError):
        zio.parse_config_text(text)


def test_profile_csv_header():
    prof = find_profile_3d(1)
    text = zio.profile_csv_text(prof, "N")
    first, second = text.splitlines()[:2]
    assert first.startswith("# family='ladder-3d'") and "P0=" in first and "N0=" in first
    assert second == "eta,N"
    assert "\r" not in text


def test_cli_profile_ladder(outdir, capsys):
    assert cli.main(["profile", "--family", "ladder3d", "--k", "1"]) == 0
    out = capsys.readouterr().out
    p0 = float([ln for ln in out.splitlines() if ln.startswith("P0")][0].split("=")[1])
    assert abs(p0 - 1.38) <= 0.02
    assert "bracket_check = pass" in out
    head, data = zio.read_profile_csv(outdir / "profiles" / "ladder3d_k1_P.csv")
    assert head == ["eta", "P"] and data[0, 1] == pytest.approx(p0)


def test_cli_profile_ground_and_family(outdir, capsys):
    assert cli.main(["profile", "--family", "ground2d"]) == 0
    assert "monotone_positive = pass" in capsys.readouterr().out
    assert cli.main(["profile", "--family", "family2d", "--a", "0"]) == 0
    out = capsys.readouterr().out
    line = [ln for ln in out.splitlines() if ln.startswith("n_plus_p2_residual")][0]
    assert float(line.split("=")[1]) < 1e-11


def test_cli_profile_failure_exit_code(outdir, monkeypatch, capsys):
    from zaklab import profiles as pr

    def boom(*a, **k):
        raise pr.ProfileError("no sign change in bracket")

    monkeypatch.setattr(pr, "find_profile_3d", boom)
    assert cli.main(["profile", "--family", "ladder3d", "--k", "7"]) == 2


def test_cli_simulate_outputs(tmp_path, outdir, capsys):
    cfg = tmp_path / "quick.ini"
    cfg.write_text(QUICK)
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    run = outdir / "runs" / "quick"
    man = json.loads((run / "manifest.json").read_text())
    assert man["stop_reason"] == "t_end"
    for p in man["outputs"]:
        assert Path(p).exists()
    header = (run / "series.csv").read_text().splitlines()[0].split(",")
    for col in ("t", "mass", "hamiltonian", "grad_psi_l2", "n_l2", "v_l2", "sup_psi"):
        assert col in header
    assert (run / "snapshots" / "snap0000.json").exists()
    meta = json.loads((run / "snapshots" / "snap0001.json").read_text())
    assert meta["t"] == pytest.approx(0.1) and meta["grid"]["M"] == 128
    assert "mass_drift" in capsys.readouterr().out


def test_cli_simulate_bad_config_writes_nothing(tmp_path, outdir):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(QUICK + "\nsurprise = 1\n")
    assert cli.main(["simulate", "--config", str(cfg)]) == 1
    assert not outdir.exists()
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.ini")]) == 1


def test_cli_sweep(tmp_path, outdir):
    a, b = tmp_path / "a.ini", tmp_path / "b.ini"
    a.write_text(QUICK)
    b.write_text(QUICK.replace("amplitude = 1.0", "amplitude = 0.5"))
    assert cli.main(["simulate", "--config", str(a), "--sweep", str(b), "--workers", "2"]) == 0
    sa = (outdir / "runs" / "a" / "series.csv").read_text()
    sb = (outdir / "runs" / "b" / "series.csv").read_text()
    assert sa != sb
    # a sweep member is identical to the same config run alone
    solo = tmp_path / "solo"
    assert cli.main(["simulate", "--config", str(a), "--out", str(solo)]) == 0
    assert (solo / "series.csv").read_text() == sa


def test_cli_check_and_failure(monkeypatch, capsys):
    assert cli.main(["check", "--kmax", "1"]) == 0
    out = capsys.readouterr().out
    assert "alpha ordering k=1" in out and "FAIL" not in out
    assert "eigenvalues 1, 2" in out and "eigenvalues 3, 12, 12" in out
    from zaklab import diagnostics as dg
    monkeypatch.setattr(dg, "strauss_ratio", lambda *a: 99.0)
    assert cli.main(["check", "--kmax", "1"]) == 4


def test_cli_rates(tmp_path, capsys):
    from zaklab.diagnostics import DiagnosticSeries
    s = DiagnosticSeries(columns=["t", "grad_psi_l2", "psi_H0.5", "n_H0", "nt_H-1"])
    for t in np.linspace(0, 0.95, 60):
        tau = 1 - t
        s.append({"t": t, "grad_psi_l2": 1 / tau, "psi_H0.5": tau ** -0.5,
                  "n_H0": 1 / tau, "nt_H-1": 2 / tau})
    p = tmp_path / "s.csv"
    p.write_text(s.to_csv_text())
    assert cli.main(["rates", "--series", str(p), "--dim", "2"]) == 0
    out = capsys.readouterr().out
    assert "t_star = 1.0" in out and "[pass]" in out
    assert cli.main(["rates", "--series", str(tmp_path / "nope.csv"), "--dim", "2"]) == 1


def test_shipped_configs_match_validation_runs():
    import conftest
    root = Path(__file__).resolve().parents[1] / "scripts" / "configs"
    pairs = {"selfsimilar2d": conftest.selfsimilar2d_cfg(), "collapse2d": conftest.collapse2d_cfg(),
             "collapse3d": conftest.collapse3d_cfg(), "subcritical2d": conftest.periodic_cfg(2e-3)}
    for stem, cfg in pairs.items():
        assert zio.read_config(root / f"{stem}.ini").digest() == cfg.digest(), stem
