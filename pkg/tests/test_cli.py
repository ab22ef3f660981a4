import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from revel.cli import main
from revel.featurize import write_raw_tensor


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({
        "seed": 3,
        "explanations_per_instance": 2,
        "blackbox": {"kind": "synthetic-linear", "seed": 5, "classes": 3},
        "featurizer": {"kind": "vector", "features": 4},
        "methods": [{"name": "lime", "sigma": 2.0}, {"name": "shap-global"}],
        "budgets": [10],
        "instances": {"kind": "synthetic", "count": 2},
    }))
    return path


@pytest.fixture
def instance_path(tmp_path):
    path = tmp_path / "instance.rt1"
    write_raw_tensor(path, np.array([1.0, 0.9, 1.1, 1.0]))
    return path


class TestExplainCommand:
    def test_prints_matrices_and_metrics(self, config_path, instance_path, capsys):
        code = main([
            "explain", "--config", str(config_path),
            "--instance", str(instance_path), "--method", "lime",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        matrices = payload["explanation"]["matrices"]
        assert set(matrices) == {"logit", "prob", "combined", "relative", "absolute"}
        assert np.asarray(matrices["logit"]).shape == (4, 3)
        assert 0.0 <= payload["metrics"]["local_concordance"] <= 1.0
        assert payload["metrics"]["norm"] == "two"

    def test_out_file(self, config_path, instance_path, tmp_path):
        out = tmp_path / "explanation.json"
        code = main([
            "explain", "--config", str(config_path), "--instance", str(instance_path),
            "--method", "shap-global", "--out", str(out),
        ])
        assert code == 0
        assert json.loads(out.read_text())["explanation"]["method"] == "shap-global"

    def test_unknown_method_is_config_error(self, config_path, instance_path, capsys):
        code = main([
            "explain", "--config", str(config_path), "--instance", str(instance_path),
            "--method", "gradcam",
        ])
        assert code == 2

    def test_missing_instance_file(self, config_path, tmp_path):
        code = main([
            "explain", "--config", str(config_path),
            "--instance", str(tmp_path / "nope.rt1"), "--method", "lime",
        ])
        assert code == 2


class TestRunCommand:
    def test_writes_reports(self, config_path, tmp_path, capsys):
        out = tmp_path / "results"
        assert main(["run", "--config", str(config_path), "--out", str(out)]) == 0
        for name in ("records.csv", "aggregates.csv", "manifest.json", "timings.csv"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 3
        assert manifest["engine"] == "revel"

    def test_identical_reruns_byte_identical(self, config_path, tmp_path):
        main(["run", "--config", str(config_path), "--out", str(tmp_path / "one")])
        main(["run", "--config", str(config_path), "--out", str(tmp_path / "two")])
        assert (tmp_path / "one" / "records.csv").read_bytes() == \
            (tmp_path / "two" / "records.csv").read_bytes()

    def test_env_seed_override(self, config_path, tmp_path, monkeypatch):
        monkeypatch.setenv("REVEL_SEED", "777")
        main(["run", "--config", str(config_path), "--out", str(tmp_path / "seeded")])
        manifest = json.loads((tmp_path / "seeded" / "manifest.json").read_text())
        assert manifest["seed"] == 777

    def test_env_workers_bound(self, config_path, tmp_path, monkeypatch):
        monkeypatch.setenv("REVEL_WORKERS", "1")
        assert main(["run", "--config", str(config_path), "--out", str(tmp_path / "w")]) == 0

    def test_bad_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("nonsense_key: 1\n")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2

    def test_unreachable_blackbox_exits_3(self, tmp_path, capsys):
        cfg = tmp_path / "ext.yaml"
        cfg.write_text(yaml.safe_dump({
            "blackbox": {"kind": "external", "command": ["/no/such/binary"]},
            "featurizer": {"kind": "vector", "features": 4},
            "methods": [{"name": "lime", "sigma": 2.0}],
            "budgets": [10],
        }))
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 3


class TestReportCommand:
    def test_recomputes_aggregates(self, config_path, tmp_path, capsys):
        out = tmp_path / "results"
        main(["run", "--config", str(config_path), "--out", str(out)])
        capsys.readouterr()
        code = main(["report", "--records", str(out / "records.csv")])
        assert code == 0
        stdout = capsys.readouterr().out
        assert stdout.strip().splitlines()[0].startswith("method,")
        emitted = (out / "aggregates.csv").read_text()
        assert stdout.replace("\r\n", "\n") == emitted.replace("\r\n", "\n")

    def test_missing_records_exits_2(self, tmp_path):
        assert main(["report", "--records", str(tmp_path / "none.csv")]) == 2


def test_console_script_smoke(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "revel.cli", "--help"], capture_output=True, text=True
    )
    assert result.returncode == 0
    assert "revel" in result.stdout
