import json
import subprocess
import sys

import pytest

from pilotqkd.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_SIMULATION, main, parse_grid
from pilotqkd.errors import ConfigError
from pilotqkd.presets import get_preset

SMALL = "sim.sample_rate = 2.5e9\nsim.symbols_per_frame = 20000\n"


@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


class TestParseGrid:
    def test_range(self):
        assert parse_grid("0.5:2:7") == pytest.approx([0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0])

    def test_list(self):
        assert parse_grid("13.2, 28.4") == [13.2, 28.4]

    @pytest.mark.parametrize("text", ["", "a,b", "0:1:0", "0:1"])
    def test_bad(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)


class TestRun:
    def test_success_writes_report(self, small_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", str(small_file), "--seed", "2", "--out", str(out)]) == EXIT_OK
        assert "R_S" in capsys.readouterr().out
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["seed"] == 2
        assert report["config"]["symbols_per_frame"] == 20000

    def test_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("security.reconciliation_efficiency = 1.5\n")
        assert main(["run", str(path)]) == EXIT_CONFIG
        assert "reconciliation_efficiency" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.cfg")]) == EXIT_CONFIG

    def test_simulation_error(self, tmp_path, capsys):
        path = tmp_path / "dark.cfg"
        path.write_text(SMALL + "tx.pilot_launch_power_dbm = -120\n")
        assert main(["run", str(path)]) == EXIT_SIMULATION
        assert "dsp" in capsys.readouterr().err

    def test_check_failure(self, tmp_path, capsys):
        # reported 13.2 km values against a 28.4 km link
        cfg = get_preset("table1-nyquist-0").config.replace(fiber_length_km=28.4, symbols_per_frame=20_000)
        path = tmp_path / "mismatch.cfg"
        path.write_text("# preset: table1-nyquist-0\n" + cfg.to_text())
        assert main(["run", str(path), "--check"]) == EXIT_CHECK
        assert "FAIL key_rate" in capsys.readouterr().out

    def test_check_without_preset_is_skipped(self, small_file):
        assert main(["run", str(small_file), "--check"]) == EXIT_OK


class TestSweep:
    def test_sweep(self, small_file, tmp_path, capsys):
        code = main(["sweep", str(small_file), "--param", "B_fil", "--grid", "0.5:1:3", "--out", str(tmp_path)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert sum(line.startswith("relative_filter_bandwidth=") for line in out.splitlines()) == 3
        assert (tmp_path / "sweep.csv").exists()

    def test_unknown_parameter(self, small_file):
        assert main(["sweep", str(small_file), "--param", "colour", "--grid", "1"]) == EXIT_CONFIG


class TestPresets:
    def test_list(self, capsys):
        assert main(["presets", "list"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "table1-nyquist-0" in out and "reach-28km" in out

    def test_emit(self, capsys):
        assert main(["presets", "emit", "reach-28km"]) == EXIT_OK
        assert capsys.readouterr().out == get_preset("reach-28km").to_text()

    def test_emit_unknown(self):
        assert main(["presets", "emit", "nope"]) == EXIT_CONFIG

    def test_emit_without_name(self):
        assert main(["presets", "emit"]) == EXIT_CONFIG


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pilotqkd", "presets", "list"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "table1-gaussian-carved-11" in proc.stdout
