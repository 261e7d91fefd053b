"""End-to-end command line checks."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from spikedfisher.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def write_clt_config(path, **overrides):
    config = {
        "dims": [40, 80, 200],
        "spikes": [[20.0, 1], [0.2, 2]],
        "distribution": "gaussian",
        "replicates": 10,
        "seed": 11,
        "kde_points": 15,
    }
    config.update(overrides)
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


def write_detect_config(path, **overrides):
    config = {
        "ladder": [[20, 40, 100], [30, 60, 150]],
        "model": {"kind": "block-noise"},
        "replicates": 20,
        "seed": 4,
    }
    config.update(overrides)
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


class TestLaw:
    def test_writes_expected_files(self, tmp_path):
        assert run_cli("law", 0.2, 0.5, "--points", 64, "--out-dir", tmp_path) == 0
        rows = read_csv(tmp_path / "law.csv")
        assert rows[0] == ["x", "density"]
        assert len(rows) == 65
        xs = np.array([float(r[0]) for r in rows[1:]])
        dens = np.array([float(r[1]) for r in rows[1:]])
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert set(summary) == {"b1", "b", "mass_at_zero", "critical_low", "critical_high"}
        assert summary["b1"] == pytest.approx(0.20322664606813293, rel=1e-12)
        assert summary["b"] == pytest.approx(12.596773353931868, rel=1e-12)
        assert summary["mass_at_zero"] == 0.0
        assert xs[0] == pytest.approx(summary["b1"]) and xs[-1] == pytest.approx(summary["b"])
        assert dens[0] == 0.0 and dens[-1] == 0.0
        assert np.all(dens[1:-1] > 0.0)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "law"

    def test_zero_points_gives_header_only(self, tmp_path):
        assert run_cli("law", 1.5, 0.3, "--points", 0, "--out-dir", tmp_path) == 0
        assert read_csv(tmp_path / "law.csv") == [["x", "density"]]
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["mass_at_zero"] == pytest.approx(1.0 - 1.0 / 1.5, rel=1e-12)

    def test_bad_ratio_exits_two(self, tmp_path, capsys):
        assert run_cli("law", 0.2, 1.2, "--out-dir", tmp_path) == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_window_exits_two(self, tmp_path, capsys):
        code = run_cli("law", 0.2, 0.5, "--x-min", 5.0, "--x-max", 1.0, "--out-dir", tmp_path)
        assert code == 2
        assert "x-min" in capsys.readouterr().err


class TestSimulateClt:
    def test_full_file_set(self, tmp_path):
        config = write_clt_config(tmp_path / "study.json")
        out = tmp_path / "out"
        assert run_cli("simulate-clt", "--config", config, "--out-dir", out) == 0

        rows = read_csv(out / "replicates.csv")
        assert rows[0] == [
            "replicate",
            "stat_1_1", "stat_2_1", "stat_2_2",
            "limit_1_1", "limit_2_1", "limit_2_2",
        ]
        assert len(rows) == 11
        assert [r[0] for r in rows[1:]] == [str(i) for i in range(10)]

        kde = read_csv(out / "kde_spike1.csv")
        assert kde[0] == ["value", "empirical_density", "limit_density"]
        assert len(kde) == 16

        kde2 = read_csv(out / "kde2d_spike2.csv")
        assert kde2[0] == ["x1", "x2", "empirical_density", "limit_density"]
        assert len(kde2) == 1 + 15 * 15

        summary = json.loads((out / "summary.json").read_text())
        assert summary["replicates"] == 10
        assert summary["distribution"] == "gaussian"
        top = summary["spikes"][0]
        assert top["multiplicity"] == 1
        assert top["outlier"] == pytest.approx(128.0 / 3.0, rel=1e-12)
        assert {"delta", "theta", "omega", "sigma_sq"} <= set(top)
        assert {"reference_variance", "ks_vs_reference"} <= set(top["members"][0])
        assert "reference_variance" not in summary["spikes"][1]["members"][0]

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 11
        assert manifest["threads"] == 1

    def test_seed_override_lands_in_manifest(self, tmp_path):
        config = write_clt_config(tmp_path / "study.json")
        out = tmp_path / "out"
        assert run_cli("simulate-clt", "--config", config, "--out-dir", out, "--seed", 99) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 99
        assert manifest["config"]["seed"] == 99

    def test_summary_only_output(self, tmp_path):
        config = write_clt_config(tmp_path / "study.json", outputs=["summary"])
        out = tmp_path / "out"
        assert run_cli("simulate-clt", "--config", config, "--out-dir", out) == 0
        assert not (out / "kde_spike1.csv").exists()
        assert (out / "summary.json").exists()

    def test_thread_count_leaves_bytes_unchanged(self, tmp_path):
        config = write_clt_config(tmp_path / "study.json")
        outs = []
        for threads in (1, 3):
            out = tmp_path / f"t{threads}"
            code = run_cli(
                "simulate-clt", "--config", config, "--out-dir", out, "--threads", threads
            )
            assert code == 0
            outs.append(out)
        names = sorted(p.name for p in outs[0].iterdir())
        assert "replicates.csv" in names
        for name in names:
            if name == "manifest.json":
                continue
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_violations_are_enumerated(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(
            json.dumps(
                {
                    "dims": [40, 80],
                    "replicates": 1,
                    "seed": -3,
                    "palette": "viridis",
                }
            ),
            encoding="utf-8",
        )
        assert run_cli("simulate-clt", "--config", bad, "--out-dir", tmp_path) == 2
        err = capsys.readouterr().err
        for fragment in ("dims", "spikes", "replicates", "seed", "palette"):
            assert fragment in err
        assert err.count("\n  - ") >= 5

    def test_missing_config_exits_two(self, tmp_path, capsys):
        assert run_cli("simulate-clt", "--config", tmp_path / "nope.json", "--out-dir", tmp_path) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_config_must_be_json_object(self, tmp_path, capsys):
        cfg = tmp_path / "arr.json"
        cfg.write_text("[1, 2]", encoding="utf-8")
        assert run_cli("simulate-clt", "--config", cfg, "--out-dir", tmp_path) == 2
        assert "JSON object" in capsys.readouterr().err

    def test_config_must_parse(self, tmp_path, capsys):
        cfg = tmp_path / "broken.json"
        cfg.write_text("{not json", encoding="utf-8")
        assert run_cli("simulate-clt", "--config", cfg, "--out-dir", tmp_path) == 2
        assert "not valid JSON" in capsys.readouterr().err


class TestDetectStudy:
    def test_frequency_table(self, tmp_path):
        config = write_detect_config(tmp_path / "study.json")
        out = tmp_path / "out"
        assert run_cli("detect-study", "--config", config, "--out-dir", out) == 0
        rows = read_csv(out / "frequency.csv")
        assert rows[0] == ["count", "p=20", "p=30"]
        assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4", "5+"]
        freq = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        np.testing.assert_allclose(freq.sum(axis=0), 1.0, atol=1e-12)

    def test_thread_count_leaves_bytes_unchanged(self, tmp_path):
        config = write_detect_config(tmp_path / "study.json")
        bodies = []
        for threads in (1, 4):
            out = tmp_path / f"t{threads}"
            code = run_cli(
                "detect-study", "--config", config, "--out-dir", out, "--threads", threads
            )
            assert code == 0
            bodies.append((out / "frequency.csv").read_bytes())
        assert bodies[0] == bodies[1]

    def test_custom_model_needs_single_rung(self, tmp_path, capsys):
        config = write_detect_config(
            tmp_path / "study.json",
            model={
                "kind": "custom",
                "mixing": [[1.0], [0.0], [0.0]],
                "noise_cov": np.eye(3).tolist(),
            },
        )
        assert run_cli("detect-study", "--config", config, "--out-dir", tmp_path) == 2
        assert "one entry" in capsys.readouterr().err

    def test_unknown_model_kind(self, tmp_path, capsys):
        config = write_detect_config(tmp_path / "study.json", model={"kind": "sparse"})
        assert run_cli("detect-study", "--config", config, "--out-dir", tmp_path) == 2
        assert "unknown kind" in capsys.readouterr().err

    def test_dn_override_config_key(self, tmp_path):
        # A large offset pushes the threshold past every eigenvalue.
        config = write_detect_config(
            tmp_path / "study.json", ladder=[[20, 40, 100]], dn_override=100.0, replicates=8
        )
        out = tmp_path / "out"
        assert run_cli("detect-study", "--config", config, "--out-dir", out) == 0
        rows = read_csv(out / "frequency.csv")
        assert float(rows[1][1]) == 1.0  # every replicate lands in the zero bin


class TestDetect:
    @staticmethod
    def make_records(tmp_path, strength=50.0, p=40, n=120, T=200, seed=15):
        rng = np.random.default_rng(seed)
        direction = np.zeros(p)
        direction[0] = 1.0
        x = math.sqrt(strength) * np.outer(direction, rng.standard_normal(T))
        x += rng.standard_normal((p, T))
        z = rng.standard_normal((p, n))
        xpath = tmp_path / "x.npy"
        zpath = tmp_path / "z.npy"
        np.save(xpath, x)
        np.save(zpath, z)
        return xpath, zpath

    def test_counts_planted_signal(self, tmp_path, capsys):
        xpath, zpath = self.make_records(tmp_path)
        assert run_cli("detect", "--signal", xpath, "--noise", zpath) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["k_hat"] == 1
        assert result["p"] == 40 and result["T"] == 200 and result["n"] == 120
        assert result["threshold"] == pytest.approx(result["b"] + result["d_n"], rel=1e-15)
        assert len(result["top_eigenvalues"]) == 10
        assert result["top_eigenvalues"][0] > result["threshold"]

    def test_csv_records_and_out_dir(self, tmp_path, capsys):
        xpath, zpath = self.make_records(tmp_path)
        xcsv = tmp_path / "x.csv"
        zcsv = tmp_path / "z.csv"
        np.savetxt(xcsv, np.load(xpath), delimiter=",")
        np.savetxt(zcsv, np.load(zpath), delimiter=",")
        out = tmp_path / "res"
        code = run_cli(
            "detect", "--signal", xcsv, "--noise", zcsv, "--out-dir", out, "--top", 3
        )
        assert code == 0
        stdout_result = json.loads(capsys.readouterr().out)
        file_result = json.loads((out / "result.json").read_text())
        assert file_result == stdout_result
        assert file_result["k_hat"] == 1
        assert len(file_result["top_eigenvalues"]) == 3
        assert (out / "manifest.json").exists()

    def test_null_records_count_zero(self, tmp_path, capsys):
        xpath, zpath = self.make_records(tmp_path, strength=0.0, seed=21)
        assert run_cli("detect", "--signal", xpath, "--noise", zpath) == 0
        assert json.loads(capsys.readouterr().out)["k_hat"] == 0

    def test_dn_override_replaces_rule(self, tmp_path, capsys):
        xpath, zpath = self.make_records(tmp_path)
        assert run_cli("detect", "--signal", xpath, "--noise", zpath, "--dn-override", 0.75) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["d_n"] == pytest.approx(0.75, rel=1e-15)
        assert result["threshold"] == pytest.approx(result["b"] + 0.75, rel=1e-15)

    def test_dimension_mismatch_exits_two(self, tmp_path, capsys):
        xpath, zpath = self.make_records(tmp_path)
        short = tmp_path / "short.npy"
        np.save(short, np.load(zpath)[:20])
        assert run_cli("detect", "--signal", xpath, "--noise", short) == 2
        assert "error:" in capsys.readouterr().err

    def test_singular_noise_exits_three(self, tmp_path, capsys):
        xpath, zpath = self.make_records(tmp_path)
        degenerate = np.load(zpath)
        degenerate[1] = 0.0  # exact zero pivot, so the pencil factorization fails
        np.save(zpath, degenerate)
        assert run_cli("detect", "--signal", xpath, "--noise", zpath) == 3
        assert "numerical error:" in capsys.readouterr().err

    def test_unsupported_format_exits_two(self, tmp_path, capsys):
        xpath, zpath = self.make_records(tmp_path)
        weird = tmp_path / "x.parquet"
        weird.write_bytes(b"\x00")
        assert run_cli("detect", "--signal", weird, "--noise", zpath) == 2
        assert "unsupported records format" in capsys.readouterr().err


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli("--version")
        assert excinfo.value.code == 0
        assert "spikedfisher" in capsys.readouterr().out

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli("frobnicate")
        assert excinfo.value.code == 2

    def test_subcommand_required(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2
