"""End-to-end runs of the command-line entry point against temporary output dirs."""

import csv
import hashlib
import json

import numpy as np
import pytest

from spikekit.cli import EXIT_CHECK_FAILED, EXIT_OK, EXIT_REFUSED, EXIT_USAGE, main, summarize


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("SPIKEKIT_THREADS", "SPIKEKIT_OUTPUT_DIR", "SPIKEKIT_CHECKPOINT_EVERY"):
        monkeypatch.delenv(name, raising=False)


def _write_config(tmp_path, **neuron):
    raw = {
        "neuron": {"kind": "asn", "alpha": 0.5, "d": 4, **neuron},
        "net": {"hidden": [8], "timesteps": 2, "seed": 0},
        "data": {"kind": "shifted", "seed": 0, "samples": 32, "features": 6, "classes": 2, "shift": 1.0},
        "train": {"epochs": 1, "batch": 16, "lr": 0.01},
        "output_dir": str(tmp_path / "out"),
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    return path


def _trace_column(path, column):
    with open(path, newline="") as f:
        return [float(row[column]) for row in csv.DictReader(f)]


class TestTrace:
    def test_asn_trace(self, tmp_path, capsys):
        code = main(["--output-dir", str(tmp_path), "trace", "--neuron", "asn", "--beta", "0.5",
                     "--alpha", "0", "--d", "4", "--inline", "2.3,0.4,3.8"])
        assert code == EXIT_OK
        assert _trace_column(tmp_path / "trace_asn.csv", "S") == [2.0, 1.0, 4.0]
        assert "-0.2125" in capsys.readouterr().out
        assert (tmp_path / "manifest.json").exists()

    def test_lif_trace(self, tmp_path):
        code = main(["--output-dir", str(tmp_path), "trace", "--neuron", "lif", "--vth", "1", "--beta", "0.5",
                     "--inline", "1.2,0.3"])
        assert code == EXIT_OK
        assert _trace_column(tmp_path / "trace_lif.csv", "S") == [1.0, 0.0]

    def test_input_csv(self, tmp_path):
        src = tmp_path / "x.csv"
        src.write_text("2.3\n0.4\n3.8\n")
        code = main(["--output-dir", str(tmp_path), "trace", "--neuron", "nasn", "--input-csv", str(src)])
        assert code == EXIT_OK
        assert _trace_column(tmp_path / "trace_nasn.csv", "S") == [0.5, 0.25, 1.0]

    def test_empty_input(self, tmp_path):
        assert main(["--output-dir", str(tmp_path), "trace", "--neuron", "asn", "--inline", ""]) == EXIT_USAGE

    def test_bad_params(self, tmp_path):
        code = main(["--output-dir", str(tmp_path), "trace", "--neuron", "asn", "--n", "4", "--inline", "1"])
        assert code == EXIT_USAGE

    def test_feature_table(self, capsys):
        assert main(["trace", "--list"]) == EXIT_OK
        assert "nasn" in capsys.readouterr().out

    def test_unknown_neuron_is_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["trace", "--neuron", "hodgkin", "--inline", "1"])
        assert info.value.code == 2


class TestGradcheck:
    def test_passes(self, tmp_path):
        assert main(["--output-dir", str(tmp_path), "gradcheck", "--trials", "1"]) == EXIT_OK
        report = json.loads((tmp_path / "gradcheck.json").read_text())
        assert report["passed"]

    def test_zero_trials(self, tmp_path):
        assert main(["--output-dir", str(tmp_path), "gradcheck", "--trials", "0"]) == EXIT_USAGE

    def test_coarse_eps_fails(self, tmp_path):
        assert main(["--output-dir", str(tmp_path), "gradcheck", "--trials", "1", "--eps", "10"]) == EXIT_CHECK_FAILED


class TestVerify:
    def test_fresh_fold_passes(self, tmp_path):
        cfg = _write_config(tmp_path)
        assert main(["verify", "--config", str(cfg), "--samples", "16"]) == EXIT_OK
        out = tmp_path / "out"
        report = json.loads((out / "verify_report.json").read_text())
        assert report["passed"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "verify"
        assert "timestamp" in manifest["nondeterministic_fields"]

    def test_continuous_is_refused(self, tmp_path):
        cfg = _write_config(tmp_path, bound_mode="continuous", alpha=0.4)
        assert main(["verify", "--config", str(cfg)]) == EXIT_REFUSED

    def test_corrupted_checkpoint(self, tmp_path):
        cfg = _write_config(tmp_path)
        bad = tmp_path / "bad.spkf"
        bad.write_bytes(b"SPKF\x01\x00")
        assert main(["verify", "--config", str(cfg), "--checkpoint", str(bad)]) == EXIT_CHECK_FAILED

    def test_non_finite_params_fail_the_check(self, tmp_path):
        cfg = _write_config(tmp_path)
        params = tmp_path / "inf.npz"
        np.savez(params, **{"l1.weight": np.full((8, 6), np.inf)})
        assert main(["verify", "--config", str(cfg), "--params", str(params)]) == EXIT_CHECK_FAILED

    def test_unknown_config_key(self, tmp_path):
        cfg = _write_config(tmp_path, alfa=1.0)
        assert main(["verify", "--config", str(cfg)]) == EXIT_USAGE


class TestTrainAndEnergy:
    def test_train_then_energy(self, tmp_path):
        cfg = _write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["train", "--config", str(cfg), "--seeds", "2"]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        assert summary["kinds"]["asn"]["runs"] == 2
        assert (out / "curve_asn_seed0.csv").exists()
        assert (out / "curve_asn_seed1.csv").exists()

        ckpt = out / "checkpoint_asn_seed0.spkf"
        assert main(["--output-dir", str(out), "energy", "--checkpoint", str(ckpt),
                     "--zeros", "--samples", "4", "--timesteps", "2"]) == EXIT_OK
        energy = json.loads((out / "energy.json").read_text())
        assert [row["layer"] for row in energy["layers"]] == ["encoder", "classifier"]

        params = out / "params_asn_seed0.npz"
        assert main(["verify", "--config", str(cfg), "--checkpoint", str(ckpt), "--params", str(params)]) == EXIT_OK

    def test_energy_bad_checkpoint(self, tmp_path):
        bad = tmp_path / "bad.spkf"
        bad.write_bytes(b"XXXX")
        assert main(["--output-dir", str(tmp_path), "energy", "--checkpoint", str(bad), "--zeros"]) == EXIT_CHECK_FAILED

    def test_one_column_csv_is_usage_error(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        assert main(["verify", "--config", str(cfg), "--samples", "4"]) == EXIT_OK
        data = tmp_path / "labels_only.csv"
        data.write_text("label\n1\n0\n")
        ckpt = tmp_path / "out" / "verify_checkpoint.spkf"
        code = main(["--output-dir", str(tmp_path), "energy", "--checkpoint", str(ckpt), "--data", str(data)])
        assert code == EXIT_USAGE
        assert "Refused" not in capsys.readouterr().err

    def test_rerun_is_reproducible(self, tmp_path):
        cfg = _write_config(tmp_path)
        runs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["--output-dir", str(out), "train", "--config", str(cfg), "--seeds", "2"]) == EXIT_OK
            runs.append(out)
        a, b = runs
        for seed in (0, 1):
            curve = f"curve_asn_seed{seed}.csv"
            assert (a / curve).read_bytes() == (b / curve).read_bytes()
            with np.load(a / f"params_asn_seed{seed}.npz") as pa, np.load(b / f"params_asn_seed{seed}.npz") as pb:
                assert pa.files == pb.files
                for name in pa.files:
                    np.testing.assert_array_equal(pa[name], pb[name])
        summary_a = json.loads((a / "summary.json").read_text())
        summary_b = json.loads((b / "summary.json").read_text())
        assert summary_a["kinds"] == summary_b["kinds"]
        assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()

    def test_manifest_hash_is_the_config_hash(self, tmp_path):
        cfg = _write_config(tmp_path)
        assert main(["train", "--config", str(cfg)]) == EXIT_OK
        canonical = json.dumps(json.loads(cfg.read_text()), sort_keys=True, separators=(",", ":"))
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config_hash"] == hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def test_unknown_kind(self, tmp_path):
        cfg = _write_config(tmp_path)
        assert main(["train", "--config", str(cfg), "--kinds", "asn,gru"]) == EXIT_USAGE


class TestSummarize:
    def test_statistics(self):
        rows = [
            {"kind": "asn", "success": True, "final_accuracy": 0.5, "alpha_toward_shift": True},
            {"kind": "asn", "success": True, "final_accuracy": 0.7, "alpha_toward_shift": False},
            {"kind": "asn", "success": False},
        ]
        stats = summarize(rows)["asn"]
        assert stats["runs"] == 2 and stats["failed"] == 1
        assert stats["mean_accuracy"] == pytest.approx(0.6)
        assert stats["std_accuracy"] == pytest.approx(0.1414213562, rel=1e-6)
        assert stats["alpha_toward_shift"] == 1
