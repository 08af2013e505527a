import json
import os

import numpy as np
import pytest

from kaczlab import load_system, save_vector
from kaczlab.cli import main


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=1))
    return str(path)


def base_config(eta):
    return {
        "matrix": {"kind": "gaussian", "m": 8, "n": 4, "seed": 5},
        "noise": {"kind": "fixed", "values": list(eta)},
        "distribution": "row_norm",
        "x0": {"random_seed": 3},
        "k_max": 20,
        "trials": 5,
        "seed": 99,
        "outputs": ["empirical", "exact", "bound_zf"],
    }


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows


@pytest.fixture
def eta8():
    return np.random.default_rng(1).standard_normal(8) * 0.1


class TestGenerate:
    def test_gaussian(self, tmp_path):
        cfg = write_config(tmp_path, {"matrix": {"kind": "gaussian", "m": 20, "n": 5, "seed": 1}})
        assert main(["generate", "--config", cfg, "--out", str(tmp_path)]) == 0
        sys_ = load_system(tmp_path / "matrix.txt")
        assert sys_.a.shape == (20, 5)
        manifest = json.loads((tmp_path / "matrix.manifest.json").read_text())
        assert manifest["m"] == 20 and manifest["n"] == 5
        assert manifest["sigma_min"] > 0

    def test_tomography_n100(self, tmp_path):
        cfg = write_config(
            tmp_path, {"matrix": {"kind": "tomography", "grid": 10, "angles": 15, "rays": 10}}
        )
        assert main(["generate", "--config", cfg, "--out", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "matrix.manifest.json").read_text())
        assert manifest["n"] == 100

    def test_underdetermined_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"matrix": {"kind": "gaussian", "m": 3, "n": 5, "seed": 1}})
        assert main(["generate", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "m must be >= n" in capsys.readouterr().err


class TestRun:
    def test_csv_shape_and_scalars(self, tmp_path, eta8):
        cfg_path = write_config(tmp_path, base_config(eta8))
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 0
        header, rows = read_csv(tmp_path / "curves.csv")
        # 1 k-column + 3 curves + stderr column for empirical
        assert header == ["k", "empirical", "empirical_stderr", "exact", "bound_zf"]
        assert len(rows) == 21  # k_max + 1 data rows
        result = json.loads((tmp_path / "result.json").read_text())
        for key in ("sigma_min", "kappa", "lambda_max_p", "lambda_max_q", "floor_exact"):
            assert key in result["scalars"]

    def test_config_echo_byte_for_byte(self, tmp_path, eta8):
        cfg_path = write_config(tmp_path, base_config(eta8))
        raw = open(cfg_path).read()
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 0
        result = json.loads((tmp_path / "result.json").read_text())
        assert result["config"] == raw

    def test_deterministic_csv_bytes(self, tmp_path, eta8):
        cfg_path = write_config(tmp_path, base_config(eta8))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(["run", "--config", cfg_path, "--out", str(out2), "--threads", "4"]) == 0
        assert (out1 / "curves.csv").read_bytes() == (out2 / "curves.csv").read_bytes()

    def test_trivial_single_point(self, tmp_path, eta8):
        cfg = base_config(eta8)
        cfg.update(k_max=0, trials=1, outputs=["empirical", "exact"])
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 0
        header, rows = read_csv(tmp_path / "curves.csv")
        assert len(rows) == 1
        k, emp, stderr, exact = rows[0]
        assert emp == exact
        assert float(stderr) == 0.0

    def test_avg_pipeline(self, tmp_path):
        cfg = {
            "matrix": {"kind": "gaussian", "m": 10, "n": 3, "seed": 2},
            "noise": {"kind": "iid", "sigma2": 1e-3, "resample": True},
            "x0": "zero",
            "k_max": 15,
            "trials": 8,
            "seed": 4,
            "outputs": ["empirical", "exact_avg", "bound_zf_avg", "floor"],
        }
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path), "--verbose"]) == 0
        header, rows = read_csv(tmp_path / "curves.csv")
        assert header == ["k", "empirical", "empirical_stderr", "exact_avg", "bound_zf_avg"]
        result = json.loads((tmp_path / "result.json").read_text())
        assert "floor_avg" in result["scalars"]

    def test_iid_resample_false_supports_exact(self, tmp_path):
        cfg = {
            "matrix": {"kind": "gaussian", "m": 10, "n": 3, "seed": 2},
            "noise": {"kind": "iid", "sigma2": 1e-3, "resample": False},
            "k_max": 10,
            "seed": 4,
            "outputs": ["empirical", "exact"],
        }
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 0
        header, rows = read_csv(tmp_path / "curves.csv")
        # empirical (trials=1, shared noise) IS the exact curve's system; both
        # start from ||z0||^2
        assert rows[0][1] == rows[0][3]

    def test_vector_files(self, tmp_path, eta8):
        save_vector(eta8, tmp_path / "eta.txt")
        x0 = np.random.default_rng(9).standard_normal(4)
        save_vector(x0, tmp_path / "x0.txt")
        cfg = base_config(eta8)
        cfg["noise"] = {"kind": "fixed", "path": str(tmp_path / "eta.txt")}
        cfg["x0"] = {"path": str(tmp_path / "x0.txt")}
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 0

    def test_matrix_from_file(self, tmp_path, fixture_dir, eta8):
        cfg = {
            "matrix": {"kind": "file", "path": os.path.join(fixture_dir, "gaussian_150x50.txt")},
            "noise": {"kind": "iid", "sigma2": 1e-4, "resample": False},
            "k_max": 5,
            "seed": 1,
            "outputs": ["exact"],
        }
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 0


class TestConfigErrors:
    def test_incompatible_exact_avg_with_fixed(self, tmp_path, eta8, capsys):
        cfg = base_config(eta8)
        cfg["outputs"] = ["exact_avg"]
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 2
        assert "exact_avg" in capsys.readouterr().err

    def test_incompatible_exact_with_resampled(self, tmp_path, capsys):
        cfg = {
            "matrix": {"kind": "gaussian", "m": 8, "n": 4, "seed": 5},
            "noise": {"kind": "iid", "sigma2": 1e-3, "resample": True},
            "k_max": 5,
            "seed": 1,
            "outputs": ["exact"],
        }
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 2
        assert "realized noise" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, eta8, capsys):
        cfg = base_config(eta8)
        cfg["trails"] = 7  # typo must not be absorbed
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 2
        assert "unknown keys" in capsys.readouterr().err

    def test_unknown_curve_kind(self, tmp_path, eta8):
        cfg = base_config(eta8)
        cfg["outputs"] = ["exacts"]
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 2

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 2

    def test_wrong_noise_length(self, tmp_path, eta8):
        cfg = base_config(eta8)
        cfg["noise"] = {"kind": "fixed", "values": [0.0, 1.0]}
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 2

    def test_runtime_failure_exits_1(self, tmp_path, eta8):
        cfg_path = write_config(tmp_path, base_config(eta8))
        out = "/proc/definitely/not/writable"
        assert main(["run", "--config", cfg_path, "--out", out]) == 1

    def test_custom_weights_substitute_general_bound(self, tmp_path, eta8, capsys):
        cfg = base_config(eta8)
        cfg["distribution"] = {"weights": [1, 2, 3, 4, 5, 6, 7, 8]}
        cfg["outputs"] = ["exact", "bound_zf"]
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 0
        err = capsys.readouterr().err
        assert "bound_zf_general" in err
        header, _ = read_csv(tmp_path / "curves.csv")
        assert header == ["k", "exact", "bound_zf_general"]


class TestValidate:
    def test_passes(self, tmp_path, capsys):
        assert main(["validate", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out
        report = json.loads((tmp_path / "validation.json").read_text())
        assert all(c["passed"] for c in report)

    def test_corrupted_tolerance_fails(self, tmp_path, capsys):
        code = main(["validate", "--out", str(tmp_path), "--corrupt-lambda-tolerance"])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out


class TestThreads:
    def test_env_var(self, tmp_path, eta8, monkeypatch):
        monkeypatch.setenv("KACZLAB_THREADS", "2")
        cfg_path = write_config(tmp_path, base_config(eta8))
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path)]) == 0

    def test_flag_auto(self, tmp_path, eta8):
        cfg_path = write_config(tmp_path, base_config(eta8))
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path), "--threads", "0"]) == 0
