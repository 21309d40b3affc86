import json
import os

import numpy as np
import pytest

from hybridcast import cli

TINY_CONFIG = {
    "data": {"source": "synthetic", "synthetic": {"n_days": 80, "seed": 5}},
    "selection": {"grid_points": 6},
    "model": {
        "variant": "dilated_cnn_lstm",
        "hidden_size": 6,
        "out_channels": 2,
        "epochs": 2,
        "batch_size": 16,
        "seed": 7,
    },
    "seeds": [1],
    "train_fraction": 0.9,
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return str(path)


def run(*argv):
    return cli.main(list(argv))


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


class TestSynthCommand:
    def test_default_column_count(self, tmp_path):
        out = str(tmp_path / "o")
        assert run("synth", "--out", out, "--n-days", "30") == 0
        header = open(os.path.join(out, "panel.csv")).readline().strip().split(",")
        assert len(header) == 55  # date + 53 features + price
        assert header[0] == "date" and header[-1] == "price"
        assert os.path.exists(os.path.join(out, "ground_truth.json"))

    def test_byte_identical_rerun(self, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert run("synth", "--out", out1, "--n-days", "40", "--seed", "9") == 0
        assert run("synth", "--out", out2, "--n-days", "40", "--seed", "9") == 0
        assert read_bytes(os.path.join(out1, "panel.csv")) == read_bytes(os.path.join(out2, "panel.csv"))
        assert read_bytes(os.path.join(out1, "ground_truth.json")) == read_bytes(
            os.path.join(out2, "ground_truth.json")
        )

    def test_too_few_days_is_usage_error(self, tmp_path):
        assert run("synth", "--out", str(tmp_path / "o"), "--n-days", "5") == 1

    def test_roundtrips_through_loader_losslessly(self, tmp_path):
        from hybridcast.pipeline import load_csv_series
        from hybridcast.synth import SyntheticSpec, generate_synthetic_panel

        out = str(tmp_path / "o")
        run("synth", "--out", out, "--n-days", "30", "--seed", "5")
        frag = load_csv_series(os.path.join(out, "panel.csv"))
        frame, _ = generate_synthetic_panel(SyntheticSpec(n_days=30, seed=5))
        assert frag.dates == frame.dates
        for name in frame.columns:  # repr() serialization keeps every bit
            assert np.array_equal(frag.columns[name], frame.columns[name]), name


class TestSelectCommand:
    def test_writes_reports(self, tiny_config, tmp_path, capsys):
        out = str(tmp_path / "o")
        assert run("select", "--config", tiny_config, "--out", out) == 0
        for name in ("rr_selection.json", "rr_selection.csv", "scad_selection.json", "scad_selection.csv"):
            assert os.path.exists(os.path.join(out, name))
        lines = capsys.readouterr().out.splitlines()
        assert any(l.startswith("rr: selected") for l in lines)
        assert any(l.startswith("scad: selected") for l in lines)

    def test_huge_lambda_warns_but_succeeds(self, tiny_config, tmp_path, capsys):
        out = str(tmp_path / "o")
        assert run("select", "--config", tiny_config, "--out", out, "--lambda", "1e9") == 0
        captured = capsys.readouterr()
        report = json.load(open(os.path.join(out, "scad_selection.json")))
        assert report["n_selected"] == 0
        assert "warning" in captured.err

    def test_missing_csv_is_data_error(self, tmp_path, capsys):
        cfg = {"data": {"source": "csv", "csv_paths": [str(tmp_path / "missing.csv")]}}
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        assert run("select", "--config", str(path), "--out", str(tmp_path / "o")) == 2
        assert "missing.csv" in capsys.readouterr().err

    def test_byte_identical_rerun(self, tiny_config, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        run("select", "--config", tiny_config, "--out", out1)
        run("select", "--config", tiny_config, "--out", out2)
        for name in ("rr_selection.json", "scad_selection.json"):
            assert read_bytes(os.path.join(out1, name)) == read_bytes(os.path.join(out2, name))


class TestTrainEvaluateCommands:
    def test_train_then_evaluate_reproduces_metrics(self, tiny_config, tmp_path):
        out = str(tmp_path / "o")
        run("select", "--config", tiny_config, "--out", out)
        assert run("train", "--config", tiny_config, "--out", out) == 0
        for name in ("checkpoint.json", "train_metrics.json", "predictions.csv"):
            assert os.path.exists(os.path.join(out, name))

        assert run("evaluate", "--config", tiny_config, "--out", out) == 0
        first = read_bytes(os.path.join(out, "eval_metrics.json"))
        first_preds = read_bytes(os.path.join(out, "eval_predictions.csv"))
        assert run("evaluate", "--config", tiny_config, "--out", out) == 0
        assert read_bytes(os.path.join(out, "eval_metrics.json")) == first
        assert read_bytes(os.path.join(out, "eval_predictions.csv")) == first_preds

        train_metrics = json.load(open(os.path.join(out, "train_metrics.json")))
        eval_metrics = json.load(open(os.path.join(out, "eval_metrics.json")))
        for key in ("mse", "mae", "mape"):
            assert eval_metrics[key] == train_metrics[key]

    def test_train_rerun_byte_identical(self, tiny_config, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        for out in (out1, out2):
            run("select", "--config", tiny_config, "--out", out)
            assert run("train", "--config", tiny_config, "--out", out) == 0
        for name in ("checkpoint.json", "train_metrics.json", "predictions.csv"):
            assert read_bytes(os.path.join(out1, name)) == read_bytes(os.path.join(out2, name))

    def test_zero_epochs_matches_no_training_oracle(self, tmp_path):
        cfg = json.loads(json.dumps(TINY_CONFIG))
        cfg["model"]["epochs"] = 0
        cfg["model"]["init_scheme"] = "zeros"
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        out = str(tmp_path / "o")
        assert run("train", "--config", str(path), "--out", out, "--all-features") == 0

        from hybridcast.config import load_experiment_config, load_panel
        from hybridcast import pipeline

        config = load_experiment_config(str(path))
        frame, _ = load_panel(config.data)
        result = pipeline.train_model(frame, None, config.model, train_fraction=0.9)
        written = json.load(open(os.path.join(out, "train_metrics.json")))
        assert written["mse"] == result.metrics.mse
        assert written["mape"] == result.metrics.mape
        # zero weights predict the standardized 0, i.e. the train-span mean
        mean_price = result.scaler.inverse_column("price", np.zeros(1))[0]
        assert np.allclose(result.predictions, mean_price)

    def test_missing_selection_is_data_error(self, tiny_config, tmp_path, capsys):
        out = str(tmp_path / "o")
        assert run("train", "--config", tiny_config, "--out", out) == 2
        assert "rr_selection.json" in capsys.readouterr().err

    def test_divergent_run_exits_numerical(self, tiny_config, tmp_path, capsys):
        out = str(tmp_path / "o")
        with np.errstate(over="ignore"):
            code = run(
                "train", "--config", tiny_config, "--out", out,
                "--all-features", "--variant", "cnn", "--lr", "1e60", "--epochs", "3",
            )
        assert code == 3
        assert "epoch" in capsys.readouterr().err

    def test_bad_config_rejected_before_training(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"model": {"variant": "lstm", "epochs": -1}}))
        assert run("train", "--config", str(path), "--out", str(tmp_path / "o")) == 1

    def test_flag_overrides_are_validated(self, tiny_config, tmp_path):
        out = str(tmp_path / "o")
        assert run("train", "--config", tiny_config, "--out", out, "--all-features", "--epochs", "-3") == 1
        assert run("train", "--config", tiny_config, "--out", out, "--all-features", "--lr", "0") == 1
        assert run("train", "--config", tiny_config, "--out", out, "--all-features", "--variant", "rnn") == 1
        assert run("select", "--config", tiny_config, "--out", out, "--alpha", "2.0") == 1
        assert run("select", "--config", tiny_config, "--out", out, "--a", "1.5") == 1


class TestCompareCommand:
    def test_five_rows_and_determinism(self, tiny_config, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        for out in (out1, out2):
            assert run("compare", "--config", tiny_config, "--out", out, "--seeds", "1") == 0
        report = json.load(open(os.path.join(out1, "comparison.json")))
        labels = [r["label"] for r in report["rows"]]
        assert labels == [
            "RR-CNN", "RR-LSTM", "RR-CNN-LSTM", "RR-DILATED_CNN-LSTM", "SCAD-DILATED_CNN-LSTM",
        ]
        assert all(np.isfinite(r[k]) for r in report["rows"] for k in ("mse", "mae", "mape"))
        assert 0.0 <= report["dilated_vs_plain_win_rate"] <= 1.0
        assert read_bytes(os.path.join(out1, "comparison.json")) == read_bytes(
            os.path.join(out2, "comparison.json")
        )
        assert os.path.exists(os.path.join(out1, "comparison.txt"))
        assert os.path.exists(os.path.join(out1, "comparison_per_seed.csv"))

    def test_bad_seeds_flag(self, tiny_config, tmp_path):
        assert run("compare", "--config", tiny_config, "--out", str(tmp_path / "o"), "--seeds", "x") == 1


class TestGradcheckCommand:
    def test_passes_and_lists_blocks(self, capsys):
        assert run("gradcheck", "--seed", "0") == 0
        out = capsys.readouterr().out
        for block in ("conv_kernel", "conv_bias", "W_f", "W_o", "b_f", "b_o", "dense_w", "dense_b"):
            assert block in out
        assert "worst relative error" in out

    def test_corrupted_gradient_fails(self, capsys):
        assert run("gradcheck", "--seed", "0", "--corrupt-block", "W_i") == 3
        assert "W_i" in capsys.readouterr().err


class TestUsageErrors:
    def test_unknown_command(self):
        assert run("frobnicate") == 1

    def test_unknown_flag(self):
        assert run("synth", "--bogus") == 1

    def test_config_file_missing(self, tmp_path):
        assert run("select", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")) == 2

    def test_invalid_json_config(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        assert run("select", "--config", str(path), "--out", str(tmp_path / "o")) == 1

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"modle": {}}))
        assert run("select", "--config", str(path), "--out", str(tmp_path / "o")) == 1
