import json
import math
from pathlib import Path

import pytest

from polariton2dcs.cli import ConfigError, build_jobspec, main, params_hash

BASE_CONFIG = {
    "system": {
        "n_molecules": 10,
        "g": 1800.0 / math.sqrt(10),
        "delta_x": 0.0,
        "delta_c": 0.0,
        "gamma_x": 1.0,
        "gamma_c": 0.9,
        "omega_v": 1200.0,
        "gamma_v": 20.0,
        "lambda_hr": 1.0,
        "omega_ref": 16113.0,
    },
    "kernel": {"tail_eps": 1e-10},
    "grids": {
        "absorption": {"start": 13000.0, "stop": 19000.0, "count": 400},
        "omega1": {"start": 13000.0, "stop": 19000.0, "count": 40},
        "omega3": {"start": 13000.0, "stop": 19000.0, "count": 40},
        "pump_probe": {"start": 12000.0, "stop": 19000.0, "count": 300},
    },
    "t_wait": [0.0, 250.0],
    "output": {"directory": "out", "formats": ["csv", "json"]},
    "workers": 1,
}


def write_config(tmp_path, **changes) -> Path:
    cfg = json.loads(json.dumps(BASE_CONFIG))
    for dotted, value in changes.items():
        node = cfg
        *parents, last = dotted.split(".")
        for key in parents:
            node = node[key]
        if value is None:
            node.pop(last, None)
        else:
            node[last] = value
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestJobSpec:
    def test_valid_config(self, tmp_path):
        spec = build_jobspec("twod", BASE_CONFIG)
        assert spec.params.n_molecules == 10
        assert spec.kernel.m_max == 12
        assert spec.t_list == [0.0, 250.0]

    def test_unknown_top_level_key(self):
        cfg = dict(BASE_CONFIG, typo_section={})
        with pytest.raises(ConfigError, match="typo_section"):
            build_jobspec("absorption", cfg)

    def test_unknown_system_key(self):
        cfg = json.loads(json.dumps(BASE_CONFIG))
        cfg["system"]["gamma_y"] = 1.0
        with pytest.raises(ConfigError, match="gamma_y"):
            build_jobspec("absorption", cfg)

    def test_missing_mode_grid(self):
        cfg = json.loads(json.dumps(BASE_CONFIG))
        del cfg["grids"]["omega3"]
        with pytest.raises(ConfigError, match="omega3"):
            build_jobspec("twod", cfg)

    def test_single_point_grid_rejected(self):
        cfg = json.loads(json.dumps(BASE_CONFIG))
        cfg["grids"]["absorption"]["count"] = 1
        with pytest.raises(ConfigError):
            build_jobspec("absorption", cfg)

    def test_bad_format_rejected(self):
        with pytest.raises(ConfigError):
            build_jobspec("absorption", BASE_CONFIG, formats_override="csv,xml")

    def test_t_list_override(self):
        spec = build_jobspec("twod", BASE_CONFIG, t_list_override="0,100,250")
        assert spec.t_list == [0.0, 100.0, 250.0]

    def test_workers_env_default(self, monkeypatch):
        monkeypatch.setenv("POLARITON2DCS_WORKERS", "3")
        cfg = dict(BASE_CONFIG, workers=0)
        assert build_jobspec("absorption", cfg).workers == 3

    def test_negative_waiting_time_rejected(self):
        with pytest.raises(ConfigError):
            build_jobspec("twod", BASE_CONFIG, t_list_override="-5")


class TestMainExitCodes:
    def test_absorption_run(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        code = main(["absorption", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        assert (out / "absorption.csv").exists()
        assert (out / "absorption.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["outputs"] == ["absorption.csv", "absorption.json"]
        assert manifest["truncation"]["m_max"] == 12
        # parameters are recoverable from the manifest alone
        assert manifest["config"]["system"]["omega_ref"] == 16113.0
        spec = build_jobspec("absorption", manifest["config"])
        assert params_hash(spec) == manifest["params_hash"]

    def test_unknown_key_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, **{"system.bogus": 1.0})
        assert main(["absorption", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_empty_grid_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, **{"grids.absorption.count": 1})
        assert main(["absorption", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_file_exits_2(self, tmp_path):
        assert main(["absorption", "--config", str(tmp_path / "missing.json")]) == 2

    def test_degenerate_bright_exits_3(self, tmp_path):
        cfg = write_config(tmp_path, **{"system.g": 0.0, "system.gamma_c": 1.0})
        assert main(["eig", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3

    def test_unwritable_output_exits_4(self, tmp_path):
        cfg = write_config(tmp_path)
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        code = main(["absorption", "--config", str(cfg), "--out", str(blocker / "sub")])
        assert code == 4

    def test_eig_output(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "eig"
        assert main(["eig", "--config", str(cfg), "--out", str(out)]) == 0
        doc = json.loads((out / "eig.json").read_text())
        assert doc["labels"][:2] == ["LP", "UP"]
        assert len(doc["labels"]) == 11
        assert doc["bright_absolute"] == pytest.approx([14313.0, 17913.0])

    def test_slices_output(self, tmp_path):
        cfg = write_config(tmp_path, **{"t_wait": [0.0, 100.0], "stokes_orders": [1]})
        out = tmp_path / "sl"
        assert main(["slices", "--config", str(cfg), "--out", str(out)]) == 0
        doc = json.loads((out / "slices.json").read_text())
        assert doc["t_list"] == [0.0, 100.0]
        assert "1" in doc["stokes"]

    def test_peaks_subcommand(self, tmp_path, capsys):
        # narrow polariton lines need the fine grid for stable peak heights
        cfg = write_config(tmp_path, **{"grids.absorption.count": 2000})
        out = tmp_path / "out"
        main(["absorption", "--config", str(cfg), "--out", str(out)])
        code = main(["peaks", str(out / "absorption.csv"), "--min-height", "0.05"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        found = sorted(round(p["refined"]) for p in report)
        assert len(found) == 3
        assert abs(found[0] - 14313) < 6 and abs(found[2] - 17913) < 6

    def test_peaks_malformed_exits_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("nonsense\n")
        assert main(["peaks", str(bad)]) == 2

    def test_validate_failure_exit_code(self, tmp_path, monkeypatch, capsys):
        import polariton2dcs.cli as cli_mod
        from polariton2dcs.validate import CheckResult

        monkeypatch.setattr(cli_mod, "run_suite",
                            lambda: [CheckResult("stub", 1.0, 0.5, False)])
        assert main(["validate", "--out", str(tmp_path / "v")]) == 1
        monkeypatch.setattr(cli_mod, "run_suite",
                            lambda: [CheckResult("stub", 0.1, 0.5, True)])
        assert main(["validate", "--out", str(tmp_path / "v")]) == 0


class TestValidateSuite:
    def test_full_suite_green_within_budget(self):
        import time

        from polariton2dcs.validate import run_suite

        start = time.perf_counter()
        results = run_suite()
        elapsed = time.perf_counter() - start
        for res in results:
            assert res.passed, res.line()
        assert elapsed < 60.0


class TestDeterminism:
    def test_worker_count_does_not_change_bytes(self, tmp_path):
        cfg = write_config(tmp_path, **{"t_wait": [0.0], "output.formats": ["csv"]})
        out1 = tmp_path / "w1"
        out8 = tmp_path / "w8"
        assert main(["twod", "--config", str(cfg), "--out", str(out1), "--workers", "1"]) == 0
        assert main(["twod", "--config", str(cfg), "--out", str(out8), "--workers", "8"]) == 0
        a = (out1 / "twod_T0fs.csv").read_bytes()
        b = (out8 / "twod_T0fs.csv").read_bytes()
        assert a == b
