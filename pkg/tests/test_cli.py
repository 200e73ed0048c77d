"""End-to-end command-line runs against temporary configs."""

import json

import pytest

from dtscatter import cli

DISPERSION_CFG = """\
[run]
command = dispersion
[params]
nu = 0.8
[grid]
k = 0.5, 1.0
[output]
path = {path}
"""

AMPLITUDE_CFG = """\
[run]
command = amplitude
seed = 1
[params]
nu = 0.8
chi = 1.0
p = 0.3
[grid]
k = 0.7
[output]
path = {path}
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_dispersion_run(tmp_path, capsys):
    out = tmp_path / "disp.json"
    cfg = write_cfg(tmp_path, DISPERSION_CFG.format(path=out))
    assert cli.main(["--config", cfg]) == 0
    assert "wrote" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["metadata"]["command"] == "dispersion"
    assert [r["k"] for r in doc["rows"]] == [0.5, 1.0]
    assert all(r["flagged"] is False for r in doc["rows"])
    assert {"omega", "omega_prime", "alpha_up", "alpha_dn"} <= set(doc["rows"][0])


def test_amplitude_run_matches_closed_form(tmp_path):
    out = tmp_path / "amp.json"
    cfg = write_cfg(tmp_path, AMPLITUDE_CFG.format(path=out))
    assert cli.main(["--config", cfg]) == 0
    row = json.loads(out.read_text())["rows"][0]
    # closed elastic coefficient at (0.8, 1.0, 0.3, 0.7)
    assert row["coefficient_re"] == pytest.approx(-0.10413883800323379, rel=1e-12)
    assert row["coefficient_im"] == pytest.approx(0.3054405677420241, rel=1e-12)
    assert row["born_gap"] < 1e-8
    assert row["converged"] is True


def test_reruns_are_byte_identical(tmp_path):
    out = tmp_path / "amp.json"
    cfg = write_cfg(tmp_path, AMPLITUDE_CFG.format(path=out))
    assert cli.main(["--config", cfg]) == 0
    first = out.read_bytes()
    assert cli.main(["--config", cfg]) == 0
    assert out.read_bytes() == first


def test_set_overrides(tmp_path):
    out = tmp_path / "disp.json"
    other = tmp_path / "other.json"
    cfg = write_cfg(tmp_path, DISPERSION_CFG.format(path=out))
    assert cli.main(["--config", cfg, "--set", "k=0.25",
                     "--set", f"path={other}"]) == 0
    doc = json.loads(other.read_text())
    assert [r["k"] for r in doc["rows"]] == [0.25]
    assert not out.exists()


def test_empty_grid_is_header_only_success(tmp_path, capsys):
    out = tmp_path / "disp.csv"
    cfg = write_cfg(tmp_path, DISPERSION_CFG.format(path=out))
    assert cli.main(["--config", cfg, "--set", "grid.k="]) == 0
    assert "0 rows, 0 flagged" in capsys.readouterr().out
    text = out.read_bytes().decode()
    assert text.startswith("k,omega") and text.count("\r\n") == 1


def test_config_problems_exit_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, DISPERSION_CFG.format(path="x.json")
                    .replace("nu = 0.8", "nu = 1.8"))
    assert cli.main(["--config", cfg]) == 1
    assert "nu must lie in [0, 1]" in capsys.readouterr().err


def test_usage_error_exit_1(capsys):
    assert cli.main([]) == 1
    assert cli.main(["--version"]) == 0
    assert "dtscatter" in capsys.readouterr().out


def test_missing_config_exit_3(tmp_path, capsys):
    assert cli.main(["--config", str(tmp_path / "nope.cfg")]) == 3
    assert "cannot read config" in capsys.readouterr().err


def test_unwritable_output_exit_3(tmp_path, capsys):
    target = tmp_path / "no_dir" / "out.csv"
    cfg = write_cfg(tmp_path, DISPERSION_CFG.format(path=target))
    assert cli.main(["--config", cfg]) == 3
    assert "no_dir" in capsys.readouterr().err


def test_all_rows_flagged_exit_2(tmp_path, capsys):
    # k = 0 degenerates the band-pair crossing, so the single row flags
    out = tmp_path / "amp.json"
    cfg = write_cfg(tmp_path, AMPLITUDE_CFG.format(path=out))
    assert cli.main(["--config", cfg, "--set", "grid.k=0"]) == 2
    assert "1 rows, 1 flagged" in capsys.readouterr().out
    rows = json.loads(out.read_text())["rows"]
    assert rows and all(r["flagged"] for r in rows)
    assert rows[0]["note"] != ""
    assert rows[0]["coefficient_re"] is None  # NaN -> null in JSON


def test_threads_env_validation(tmp_path, capsys, monkeypatch):
    sweep = """\
[run]
command = sweep
[params]
nu = 0.8
chi = 1.0
p = 0.3
[grid]
k = 0.4, 0.9
[output]
path = {path}
"""
    out = tmp_path / "sweep.json"
    cfg = write_cfg(tmp_path, sweep.format(path=out))
    monkeypatch.setenv("DTSCATTER_THREADS", "2")
    assert cli.main(["--config", cfg]) == 0
    doc = json.loads(out.read_text())
    assert doc["metadata"]["workers"] == 2
    assert [r["k"] for r in doc["rows"]] == [0.4, 0.9]  # order preserved
    monkeypatch.setenv("DTSCATTER_THREADS", "lots")
    assert cli.main(["--config", cfg]) == 1
    assert "DTSCATTER_THREADS" in capsys.readouterr().err


def test_wavepacket_run_with_snapshots(tmp_path):
    wp = """\
[run]
command = wavepacket
[params]
nu = 0.8
chi = 1.0
p = 0.3
k0 = 0.7
sigma_x = 32
length = 2048
t_steps = 450
snapshot_every = 450
snapshot_prefix = {prefix}
[output]
path = {path}
"""
    out = tmp_path / "wp.json"
    prefix = str(tmp_path / "snap_")
    cfg = write_cfg(tmp_path, wp.format(path=out, prefix=prefix))
    assert cli.main(["--config", cfg]) == 0
    doc = json.loads(out.read_text())
    meta = doc["metadata"]
    assert meta["diagonal_abs_error"] < 5e-4
    labels = [r["band_pair"] for r in doc["rows"]]
    assert labels == ["++", "+-", "-+", "--"]
    # snapshots at interacting steps 0, 450, 900
    for t in (0, 450, 900):
        snap = tmp_path / f"snap_{t:05d}.csv"
        text = snap.read_bytes().decode()
        assert text.startswith("site,component,re,im\r\n")
        assert text.count("\r\n") == 2048 * 4 + 1
