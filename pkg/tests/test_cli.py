import filecmp
import json
import subprocess
import sys

import pytest

from fbqkd.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from fbqkd.config import default_link_config, save_config
from fbqkd.detection import simulate_streams, write_streams_binary, write_streams_csv


def run_cli(*args):
    return main([str(a) for a in args])


class TestExitCodes:
    def test_validate_default_config(self, capsys):
        assert run_cli("validate-config") == EXIT_OK
        assert "OK" in capsys.readouterr().out

    def test_validate_good_file(self, tmp_path):
        path = tmp_path / "link.json"
        save_config(default_link_config(), path)
        assert run_cli("--config", path, "validate-config") == EXIT_OK

    def test_bad_config_file(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"schema_version": 99}')
        assert run_cli("--config", path, "validate-config") == EXIT_CONFIG

    def test_unknown_key_in_config(self, tmp_path):
        path = tmp_path / "extra.json"
        path.write_text('{"schema_version": 1, "mystery": 3}')
        assert run_cli("--config", path, "validate-config") == EXIT_CONFIG

    def test_missing_stream_file_is_runtime_error(self, tmp_path):
        assert run_cli("--out", tmp_path, "decode", tmp_path / "absent.bin") == EXIT_RUNTIME


class TestCommands:
    def test_qber_vs_time_outputs(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli("--out", out, "--duration", 4, "--seed", 5, "qber-vs-time", "--window", 2)
        assert code == EXIT_OK
        assert (out / "qber_timeseries.csv").exists()
        assert (out / "lock_trace.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary) == {
            "fiber_km",
            "eps_z",
            "eps_x",
            "se_z",
            "se_x",
            "sift_ratio",
            "skr_bps",
            "n_sifted",
        }
        assert summary["n_sifted"] > 0

    def test_fringe_outputs(self, tmp_path):
        out = tmp_path / "fr"
        assert run_cli("--out", out, "fringe", "--thetas", "0.0,1.0") == EXIT_OK
        fits = (out / "fringe_fits.csv").read_text().strip().splitlines()
        assert len(fits) == 3

    def test_tomography_outputs(self, tmp_path):
        out = tmp_path / "tomo"
        assert run_cli("--out", out, "tomography", "--shots", 2000) == EXIT_OK
        report = json.loads((out / "tomography.json").read_text())
        assert 0.9 < report["fidelity_to_target"] <= 1.0

    def test_decode_binary_and_csv(self, tmp_path):
        link = default_link_config(seed=11)
        streams = simulate_streams(link, 0.5)
        bin_path = tmp_path / "s.bin"
        csv_path = tmp_path / "s.csv"
        write_streams_binary(bin_path, streams)
        write_streams_csv(csv_path, streams)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli("--out", out_a, "decode", bin_path) == EXIT_OK
        assert run_cli("--out", out_b, "decode", csv_path) == EXIT_OK
        assert (out_a / "events.csv").read_text() == (out_b / "events.csv").read_text()

    def test_skr_vs_distance_small(self, tmp_path):
        out = tmp_path / "scan"
        code = run_cli("--out", out, "--duration", 2, "skr-vs-distance", "--lengths", "0,26")
        assert code == EXIT_OK
        rows = (out / "skr_vs_distance.csv").read_text().strip().splitlines()
        assert len(rows) == 3
        model_rows = (out / "skr_vs_distance_model.csv").read_text().strip().splitlines()
        assert len(model_rows) == 3


class TestReproducibility:
    def test_reruns_are_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            assert run_cli("--out", out, "--duration", 3, "--seed", 21, "qber-vs-time", "--window", 1.5) == EXIT_OK
        match, mismatch, errors = filecmp.cmpfiles(
            out1, out2, ["qber_timeseries.csv", "lock_trace.csv", "summary.json"], shallow=False
        )
        assert not mismatch and not errors

    def test_entry_point_runs(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "fbqkd.cli", "validate-config"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert "OK" in result.stdout
