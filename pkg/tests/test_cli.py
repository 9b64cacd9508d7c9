import json

import numpy as np
import pytest

from balancecast import ebm_predict_batch, load_csv, load_model, synthetic_schema
from balancecast.cli import main
from balancecast.data import align_horizon


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = run(
        "synth",
        "--n-rows", "700",
        "--seed", "3",
        "--noise-sd", "2.0",
        "--spike-prob", "0.03",
        "--spike-scale", "40",
        "--out", str(out),
    )
    assert code == 0
    return out


class TestSynth:
    def test_writes_dataset_and_sidecar(self, data_dir):
        header = (data_dir / "dataset.csv").read_text().splitlines()[0]
        assert header == (
            "timestamp,spot,consumption,hydro,wind,heating,"
            "hour_sin,hour_cos,month_sin,month_cos,target"
        )
        sidecar = json.loads((data_dir / "truth.json").read_text())
        assert set(sidecar) == set(synthetic_schema().names)

    def test_rerun_byte_identical(self, data_dir, tmp_path):
        again = tmp_path / "again"
        code = run(
            "synth", "--n-rows", "700", "--seed", "3", "--noise-sd", "2.0",
            "--spike-prob", "0.03", "--spike-scale", "40", "--out", str(again),
        )
        assert code == 0
        assert (again / "dataset.csv").read_bytes() == (
            data_dir / "dataset.csv"
        ).read_bytes()
        assert (again / "truth.json").read_bytes() == (
            data_dir / "truth.json"
        ).read_bytes()

    def test_zero_rows_is_usage_error(self, tmp_path):
        assert run("synth", "--n-rows", "0", "--out", str(tmp_path)) == 2


class TestTrain:
    @pytest.mark.parametrize("kind", ["naive", "gbt", "ebm", "stacked"])
    def test_each_kind_trains(self, data_dir, tmp_path, kind):
        out = tmp_path / kind
        code = run(
            "train", "--data", str(data_dir / "dataset.csv"), "--model", kind,
            "--out", str(out), "--horizon-steps", "32",
            "--n-trees", "5", "--outer-rounds", "5", "--max-bins", "16",
            "--meta-n-trees", "3",
        )
        assert code == 0
        doc = json.loads((out / "model.json").read_text())
        assert doc["kind"] == kind
        assert doc["horizon_steps"] == 32

    def test_ebm_file_contains_shapes_and_intercept(self, data_dir, tmp_path):
        out = tmp_path / "ebm"
        run(
            "train", "--data", str(data_dir / "dataset.csv"), "--model", "ebm",
            "--out", str(out), "--outer-rounds", "5", "--max-bins", "16",
        )
        doc = json.loads((out / "model.json").read_text())
        assert "shapes" in doc["model"] and "intercept" in doc["model"]

    def test_loaded_model_predicts_like_memory(self, data_dir, tmp_path):
        out = tmp_path / "roundtrip"
        run(
            "train", "--data", str(data_dir / "dataset.csv"), "--model", "ebm",
            "--out", str(out), "--outer-rounds", "8", "--max-bins", "16",
            "--seed", "42",
        )
        _, horizon, model = load_model(out / "model.json")
        raw = load_csv(data_dir / "dataset.csv", synthetic_schema())
        aligned = align_horizon(raw, horizon)
        from balancecast import EbmConfig, ebm_train

        memory = ebm_train(
            aligned,
            EbmConfig(outer_rounds=8, learning_rate=0.05, max_bins=16, seed=42),
        )
        rows = aligned.features[:100]
        assert np.array_equal(
            ebm_predict_batch(model, rows), ebm_predict_batch(memory, rows)
        )

    def test_unknown_kind_usage_error(self, data_dir, tmp_path):
        code = run(
            "train", "--data", str(data_dir / "dataset.csv"),
            "--model", "sarimax", "--out", str(tmp_path),
        )
        assert code == 2

    def test_missing_data_file(self, tmp_path):
        code = run(
            "train", "--data", str(tmp_path / "nope.csv"), "--model", "naive",
            "--out", str(tmp_path),
        )
        assert code == 3


class TestPredict:
    def test_predictions_written(self, data_dir, tmp_path):
        model_dir = tmp_path / "m"
        run(
            "train", "--data", str(data_dir / "dataset.csv"), "--model", "gbt",
            "--out", str(model_dir), "--n-trees", "4",
        )
        out = tmp_path / "p"
        code = run(
            "predict", "--data", str(data_dir / "dataset.csv"),
            "--model", str(model_dir / "model.json"), "--out", str(out),
        )
        assert code == 0
        lines = (out / "predictions.csv").read_text().splitlines()
        assert lines[0] == "issue_timestamp,target_timestamp,prediction"
        # 700 rows aligned over 32 steps leaves 668 predictions.
        assert len(lines) == 1 + 668
        issue, target_ts, _ = lines[1].split(",")
        assert int(target_ts) - int(issue) == 32


class TestEvaluate:
    def test_report_rows_and_determinism(self, data_dir, tmp_path):
        out1, out2 = tmp_path / "e1", tmp_path / "e2"
        argv = [
            "evaluate", "--data", str(data_dir / "dataset.csv"),
            "--models", "naive,gbt,ebm,stacked",
            "--initial-train", "400", "--test-len", "134",
            "--epsilon", "20",
            "--n-trees", "8", "--outer-rounds", "8", "--max-bins", "16",
            "--meta-n-trees", "4", "--max-depth", "3",
        ]
        assert run(*argv, "--out", str(out1)) == 0
        assert run(*argv, "--out", str(out2)) == 0
        report = (out1 / "report.csv").read_text().splitlines()
        assert len(report) == 1 + 8
        models_in_report = {line.split(",")[2] for line in report[1:]}
        assert models_in_report == {"naive", "gbt", "ebm", "stacked"}
        for name in ("report.csv", "report.txt", "predictions.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_epsilon_monotone(self, data_dir, tmp_path):
        kept = []
        for i, eps in enumerate(("0.5", "5", "50")):
            out = tmp_path / f"eps{i}"
            code = run(
                "evaluate", "--data", str(data_dir / "dataset.csv"),
                "--models", "naive", "--initial-train", "400",
                "--test-len", "134", "--epsilon", eps, "--out", str(out),
            )
            assert code == 0
            row = (out / "report.csv").read_text().splitlines()[2].split(",")
            kept.append(int(row[5]))
        assert kept[0] >= kept[1] >= kept[2]

    def test_missing_fold_params_usage_error(self, data_dir, tmp_path):
        code = run(
            "evaluate", "--data", str(data_dir / "dataset.csv"),
            "--models", "naive", "--out", str(tmp_path),
        )
        assert code == 2


@pytest.fixture(scope="module")
def ebm_model(data_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("explain_model")
    run(
        "train", "--data", str(data_dir / "dataset.csv"), "--model", "ebm",
        "--out", str(out), "--outer-rounds", "10", "--max-bins", "16",
    )
    return out / "model.json"


class TestExplain:
    def test_global_importance_sorted(self, data_dir, tmp_path, ebm_model):
        out = tmp_path / "g"
        code = run(
            "explain", "--model", str(ebm_model),
            "--data", str(data_dir / "dataset.csv"), "--out", str(out),
        )
        assert code == 0
        lines = (out / "importance.csv").read_text().splitlines()
        assert lines[0] == "rank,feature,mac"
        macs = [float(line.split(",")[2]) for line in lines[1:]]
        assert macs == sorted(macs, reverse=True)
        shapes_header = (out / "shapes.csv").read_text().splitlines()[0]
        assert shapes_header == "feature,bin_lower,bin_upper,contribution"

    def test_shapes_serialize_infinities(self, data_dir, tmp_path, ebm_model):
        out = tmp_path / "s"
        run(
            "explain", "--model", str(ebm_model),
            "--data", str(data_dir / "dataset.csv"), "--out", str(out),
        )
        body = (out / "shapes.csv").read_text()
        assert ",-inf," in body and ",inf," in body

    def test_local_sums_to_prediction(self, data_dir, tmp_path, ebm_model):
        out = tmp_path / "l"
        code = run(
            "explain", "--model", str(ebm_model),
            "--data", str(data_dir / "dataset.csv"),
            "--row", "17", "--out", str(out),
        )
        assert code == 0
        rows = (out / "local_explanation.csv").read_text().splitlines()[1:]
        values = {}
        contributions = []
        for line in rows:
            name, value = line.rsplit(",", 1)
            if name.startswith("__"):
                values[name] = float(value)
            else:
                contributions.append(float(value))
        acc = values["__intercept__"]
        for c in contributions:
            acc += c
        assert acc == values["__prediction__"]

    def test_non_ebm_model_unsupported(self, data_dir, tmp_path):
        model_dir = tmp_path / "naive_model"
        run(
            "train", "--data", str(data_dir / "dataset.csv"), "--model", "naive",
            "--out", str(model_dir),
        )
        code = run(
            "explain", "--model", str(model_dir / "model.json"),
            "--data", str(data_dir / "dataset.csv"), "--out", str(tmp_path),
        )
        assert code == 2


class TestGrid:
    def test_grid_product_sorted_by_mae(self, data_dir, tmp_path):
        out = tmp_path / "grid"
        code = run(
            "grid", "--data", str(data_dir / "dataset.csv"), "--model", "gbt",
            "--param", "n_trees=2,6", "--param", "max_depth=2,3",
            "--initial-train", "500", "--test-len", "168",
            "--out", str(out),
        )
        assert code == 0
        lines = (out / "grid.csv").read_text().splitlines()
        assert lines[0] == "n_trees,max_depth,mae,rmse,r2"
        assert len(lines) == 1 + 4
        maes = [float(line.split(",")[2]) for line in lines[1:]]
        assert maes == sorted(maes)

    def test_unknown_param_usage_error(self, data_dir, tmp_path):
        code = run(
            "grid", "--data", str(data_dir / "dataset.csv"), "--model", "gbt",
            "--param", "bogus=1,2", "--initial-train", "500",
            "--test-len", "168", "--out", str(tmp_path),
        )
        assert code == 2

    def test_naive_not_grid_searchable(self, data_dir, tmp_path):
        code = run(
            "grid", "--data", str(data_dir / "dataset.csv"), "--model", "naive",
            "--param", "n_trees=1", "--initial-train", "500",
            "--test-len", "168", "--out", str(tmp_path),
        )
        assert code == 2


class TestConfigFile:
    def test_flags_override_config_file(self, data_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_rows": 50, "seed": 1, "noise_sd": 0.0}))
        out = tmp_path / "out"
        code = run("synth", "--config", str(cfg), "--n-rows", "80", "--out", str(out))
        assert code == 0
        lines = (out / "dataset.csv").read_text().splitlines()
        assert len(lines) == 1 + 80

    def test_unknown_config_key_usage_error(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus_key": 1}))
        assert run("synth", "--config", str(cfg), "--out", str(tmp_path)) == 2

    def test_usage_error_without_subcommand(self):
        assert run() == 2
