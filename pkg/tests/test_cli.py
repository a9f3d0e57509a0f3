import csv
import json

import numpy as np
import pytest

from qsurrogate.cli import main
from qsurrogate.config import RunConfig
from qsurrogate.pipeline import load_context
from qsurrogate.spectral import SpectralDecomposition, predict_low_rank

SMALL = {
    "dataset": {"n_qubits": 4, "labels": 3, "per_label": 8, "anchor_depth": 6},
    "spectral": {"K": 2, "K_sweep": [1, 2]},
    "aqce": {"J0": 4, "delta_J": 2, "J_max": 40},
    "gradients": {"n_random": 2, "adam_steps": 3},
}


def write_config(path, data=SMALL):
    path.write_text(json.dumps(data))
    return path


def load_without_timestamps(path):
    data = json.loads(path.read_text())
    data.pop("generated_at")
    return data


def artifact_texts(root):
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            rel = p.relative_to(root).as_posix()
            out[rel] = load_without_timestamps(p) if rel.endswith("_report.json") or rel == "report.json" else p.read_text()
    return out


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    return write_config(tmp_path_factory.mktemp("cfg") / "run.json")


class TestPipeline:
    def test_runs_and_is_deterministic(self, tmp_path, config_path, capsys):
        assert main(["pipeline", "--config", str(config_path), "--out", str(tmp_path / "a")]) == 0
        assert main(["pipeline", "--config", str(config_path), "--out", str(tmp_path / "b")]) == 0
        a, b = artifact_texts(tmp_path / "a"), artifact_texts(tmp_path / "b")
        assert a.keys() == b.keys()
        assert a == b
        assert "adam_loss_label0.csv" in a and "aqce_trace_label2.csv" in a
        summary = json.loads((tmp_path / "a" / "report.json").read_text())
        assert summary["version"].startswith("qsurrogate-v")

    def test_stages_equal_pipeline(self, tmp_path, config_path):
        assert main(["pipeline", "--config", str(config_path), "--out", str(tmp_path / "p")]) == 0
        for stage in ("generate", "train", "spectral", "synthesize", "gradients"):
            assert main([stage, "--config", str(config_path), "--out", str(tmp_path / "s")]) == 0
        p, s = artifact_texts(tmp_path / "p"), artifact_texts(tmp_path / "s")
        p.pop("report.json")
        assert p == s

    def test_thread_count_does_not_change_results(self, tmp_path, config_path):
        for threads in ("1", "3"):
            args = ["synthesize", "--config", str(config_path), "--out", str(tmp_path / threads), "--threads", threads]
            for stage in ("train", "spectral"):
                assert main([stage, *args[1:]]) == 0
            assert main(args) == 0
        for name in ("eqs_model.json", "aqce_trace_label1.csv"):
            assert (tmp_path / "1" / name).read_text() == (tmp_path / "3" / name).read_text()

    def test_overrides_change_config_hash(self, tmp_path, config_path, capsys):
        main(["show-config", "--config", str(config_path)])
        base = json.loads(capsys.readouterr().out)
        main(["show-config", "--config", str(config_path), "--K", "1", "--C", "2.5", "--seed", "9"])
        over = json.loads(capsys.readouterr().out)
        assert (over["spectral"]["K"], over["svm"]["C"], over["dataset"]["seed"]) == (1, 2.5, 9)
        assert base["dataset"]["n_qubits"] == over["dataset"]["n_qubits"] == 4


class TestErrors:
    def test_missing_dataset(self, tmp_path, capsys):
        code = main(["train", "--dataset", str(tmp_path / "missing"), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "not found" in capsys.readouterr().err

    def test_spectral_without_model(self, tmp_path, config_path, capsys):
        assert main(["spectral", "--config", str(config_path), "--out", str(tmp_path)]) == 2
        assert "kernel_model.json" in capsys.readouterr().err

    def test_single_label(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", {"dataset": {"n_qubits": 3, "labels": 1, "per_label": 4}})
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "label" in capsys.readouterr().err

    def test_bad_config_position(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"svm": {"C": 1.0,}}')
        assert main(["pipeline", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
        assert "bad.json:1:" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", {"svn": {}})
        assert main(["show-config", "--config", str(cfg)]) == 2

    def test_dataset_hash_mismatch(self, tmp_path, config_path, capsys):
        out = tmp_path / "o"
        assert main(["train", "--config", str(config_path), "--out", str(out)]) == 0
        assert main(["spectral", "--config", str(config_path), "--out", str(out), "--seed", "5"]) == 2
        assert "different dataset" in capsys.readouterr().err

    def test_not_converged_exit_code(self, tmp_path, capsys):
        data = dict(SMALL, aqce={"J0": 1, "delta_J": 1, "J_max": 2, "sweeps": 1, "F_target": 0.999})
        cfg = write_config(tmp_path / "c.json", data)
        assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
        assert "did not reach" in capsys.readouterr().err


class TestArtifacts:
    def test_accuracy_table_recomputes_from_bundle(self, tmp_path, config_path):
        out = tmp_path / "o"
        assert main(["pipeline", "--config", str(config_path), "--out", str(out)]) == 0
        ctx = load_context(RunConfig.load(config_path))
        bundle = SpectralDecomposition.from_dict(json.loads((out / "spectral_bundle.json").read_text()), ctx.train_states)
        rows = list(csv.DictReader((out / "accuracy_vs_K.csv").open()))
        assert int(rows[-1]["K"]) == bundle.subspace_dim
        report = json.loads((out / "spectral_report.json").read_text())["results"]
        assert float(rows[-1]["test_accuracy"]) == report["implicit_test_accuracy"]
        y = ctx.y[ctx.test_idx]
        for row in rows:
            pred, _ = predict_low_rank(bundle.low_rank(int(row["K"])), ctx.test_states)
            assert float(row["test_accuracy"]) == np.mean(pred == y)
        ratios = [float(r["mean_cumulative_ratio"]) for r in rows]
        assert ratios == sorted(ratios)
