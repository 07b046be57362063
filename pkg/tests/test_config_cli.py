import subprocess
import sys

import pytest

from dispersive_meshless.cli import main
from dispersive_meshless.config import bundled_config, load_config, parse_config, serialize_config, with_overrides
from dispersive_meshless.errors import ConfigParseError, ConfigValidationError


@pytest.fixture(scope="module")
def short_cfg(table1):
    return with_overrides(
        table1,
        time_duration=0.15e-9,
        diagnostics_oracle=False,
        diagnostics_charge_times=(0.5e-12,),
    )


def _write(tmp_path, cfg, name="c.cfg"):
    path = tmp_path / name
    path.write_text(serialize_config(cfg))
    return path


def test_bundled_config(table1):
    assert table1.cavity_width == 5e-3 and table1.cavity_spacing == 0.5e-3
    assert table1.plasma_region == (0.0, 2.5e-3, 0.0, 5e-3)
    assert table1.plasma_omega_ep == 1e11
    assert table1.n_steps == round(2e-9 / table1.dt)
    assert table1.solver_basis_mode == "vector"


def test_round_trip(table1, short_cfg):
    for cfg in (table1, short_cfg):
        assert parse_config(serialize_config(cfg)) == cfg


def test_defaults_fill_missing_keys():
    cfg = parse_config("[cavity]\nwidth = 5e-3\n")
    assert cfg.kernel_shape_parameter == 3.0 and cfg.time_safety == 0.1


@pytest.mark.parametrize(
    "text,exc",
    [
        ("[source]\ntau = 0\n", ConfigValidationError),
        ("[cavity]\nspacing = 0.3e-3\n", ConfigValidationError),
        ("[cavity]\ncolour = red\n", ConfigValidationError),
        ("[mesh]\nspacing = 1\n", ConfigValidationError),
        ("[cavity]\nwidth = five\n", ConfigParseError),
        ("width = 5e-3\n", ConfigParseError),
        ("[time]\nsafety = 2\n", ConfigValidationError),
        ("[plasma]\nregion = 0 6e-3 0 5e-3\n", ConfigValidationError),
    ],
)
def test_bad_configs(text, exc):
    with pytest.raises(exc):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigParseError):
        load_config(tmp_path / "absent.cfg")


def test_unknown_bundle():
    with pytest.raises(FileNotFoundError):
        bundled_config("nope.cfg")


def test_cli_run_writes_artifacts(tmp_path, short_cfg, capsys):
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, short_cfg)), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"nodes.csv", "probes.csv", "spectrum.csv", "peaks.csv", "oracle.csv", "summary.txt", "config.cfg", "manifest.txt"} <= names
    assert any(n.startswith("charge_") for n in names)
    assert load_config(out / "config.cfg") == with_overrides(short_cfg, output_directory=str(out))
    assert "dominant_peak_hz" in capsys.readouterr().out
    manifest = (out / "manifest.txt").read_text()
    assert "material1.b0" in manifest and "build = " in manifest


def test_cli_is_deterministic(tmp_path, short_cfg):
    path = _write(tmp_path, short_cfg)
    for d in ("a", "b"):
        assert main(["run", str(path), "--out", str(tmp_path / d)]) == 0
    for name in ("probes.csv", "spectrum.csv", "peaks.csv", "nodes.csv", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_cli_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[source]\ntau = -1\n")
    assert main(["run", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "absent.cfg")]) == 2


def test_cli_numeric_failure_exit(tmp_path, short_cfg, capsys):
    cfg = with_overrides(short_cfg, time_dt=4 * short_cfg.dt / short_cfg.time_safety)
    assert main(["run", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_cli_compare(tmp_path, short_cfg, capsys):
    out = tmp_path / "cmp"
    assert main(["compare", str(_write(tmp_path, short_cfg)), "--out", str(out)]) == 0
    report = dict(line.split(" = ", 1) for line in (out / "comparison.txt").read_text().splitlines())
    assert report["vector.n_vector"] == report["scalar.n_vector"]
    assert report["vector.n_scalar"] == report["scalar.n_scalar"]
    assert report["vector_more_concentrated"] == "True"
    assert (out / "vector" / "probes.csv").exists() and (out / "scalar" / "probes.csv").exists()


def test_cli_oracle(tmp_path, table1, capsys):
    cfg = with_overrides(table1, diagnostics_oracle_grid=64, diagnostics_oracle_band=(165e9, 175e9))
    assert main(["oracle", str(_write(tmp_path, cfg))]) == 0
    out = capsys.readouterr().out
    assert "TE(4,4)" in out and "mode = " in out


def test_cli_sweep(tmp_path, short_cfg, capsys):
    out = tmp_path / "sw"
    assert main(["sweep", str(_write(tmp_path, short_cfg)), "--param", "support_factor", "--range", "2.2:2.6:2", "--out", str(out)]) == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "support_factor,dominant_hz,oracle_hz,relative_error" and len(rows) == 3


def test_cli_rejects_bad_range(tmp_path, short_cfg):
    with pytest.raises(SystemExit):
        main(["sweep", str(_write(tmp_path, short_cfg)), "--range", "1:2"])


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "dispersive_meshless", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "compare" in out.stdout
