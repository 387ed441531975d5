import json

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from src.main import app, run

runner = CliRunner()

FAST = ["--rf-trees", "5"]


def invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


@pytest.fixture
def data_csv(tmp_path):
    path = tmp_path / "data.csv"
    result = invoke("gen-data", "--rows", 80, "--seed", 7, "--out", path)
    assert result.exit_code == 0, result.output
    return path


@pytest.fixture
def linear_csv(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.uniform(1.0, 10.0, size=(40, 2))
    frame = pd.DataFrame({
        "sample_id": [f"L{i}" for i in range(40)],
        "smell_type": "GodClass",
        "wmc": x[:, 0],
        "task_count": x[:, 1] * 100,
        "delta_cpu": 5.0 + 0.5 * x[:, 0] + 0.01 * x[:, 1] * 100,
        "delta_mem": 1.0,
    })
    path = tmp_path / "linear.csv"
    frame.to_csv(path, index=False)
    return path


def test_gen_data_is_byte_identical(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert invoke("gen-data", "--rows", 50, "--seed", 7, "--out", first).exit_code == 0
    assert invoke("gen-data", "--rows", 50, "--seed", 7, "--out", second).exit_code == 0

    assert first.read_bytes() == second.read_bytes()
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["command"] == "gen-data"
    assert manifest["seeds"] == {"seed": 7}
    assert manifest["outputs"] == [str(first)]


def test_gen_data_rejects_too_few_rows(tmp_path):
    result = invoke("gen-data", "--rows", 5, "--out", tmp_path / "d.csv")

    assert result.exit_code == 2
    assert "rows must be ≥ 10" in result.output


def test_gen_data_anchor_dump(tmp_path):
    anchors = tmp_path / "anchors.csv"
    result = invoke("gen-data", "--rows", 10, "--out", tmp_path / "d.csv", "--anchors", anchors)

    assert result.exit_code == 0
    table = pd.read_csv(anchors)
    assert len(table) == 8
    assert list(table["task_count"]) == [500, 1000, 1500, 2000, 2500, 3000, 3500, 4000]


def test_select_features_output(data_csv, tmp_path):
    out = tmp_path / "mask.json"
    result = invoke("select-features", "--data", data_csv, "--generations", 4, "--population", 8,
                    "--seed", 1, "--out", out)

    assert result.exit_code == 0, result.output
    ga = json.loads(out.read_text())
    assert len(ga["best_mask"]) == 10
    bests = [h["best"] for h in ga["history"]]
    assert bests == sorted(bests)
    assert (tmp_path / "mask.json.manifest.json").exists()


def test_select_features_single_feature(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("sample_id,smell_type,task_count,delta_cpu,delta_mem\n" +
                    "".join(f"s{i},GodClass,{100 * (i + 1)},{1.0 + 0.01 * i},1.0\n" for i in range(20)))
    out = tmp_path / "mask.json"
    result = invoke("select-features", "--data", path, "--generations", 2, "--population", 4, "--out", out)

    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text())["best_mask"] == [1]


def test_train_uregm_logs_every_combination(data_csv, tmp_path):
    out = tmp_path / "model.json"
    result = invoke("train", "--data", data_csv, "--model", "uregm", "--folds", 3, "--seed", 2, "--out", out, *FAST)

    assert result.exit_code == 0, result.output
    model = json.loads(out.read_text())
    assert model["model_type"] == "uregm"
    assert len(model["search_log"]) == 15


def test_train_lir_then_predict_recovers_linear_target(linear_csv, tmp_path):
    model, preds = tmp_path / "lir.json", tmp_path / "preds.csv"
    assert invoke("train", "--data", linear_csv, "--model", "lir", "--out", model).exit_code == 0
    result = invoke("predict", "--model", model, "--data", linear_csv, "--out", preds)

    assert result.exit_code == 0, result.output
    frame = pd.read_csv(preds)
    source = pd.read_csv(linear_csv)
    assert list(frame.columns) == ["sample_id", "prediction"]
    assert list(frame["sample_id"]) == list(source["sample_id"])
    assert float(np.mean((frame["prediction"] - source["delta_cpu"]) ** 2)) < 1e-6


def test_train_with_mask_and_holdout(data_csv, tmp_path):
    mask, out = tmp_path / "mask.json", tmp_path / "model.json"
    mask.write_text(json.dumps([1, 0, 0, 0, 0, 0, 1, 0, 0, 0]))
    result = invoke("train", "--data", data_csv, "--model", "lr", "--mask", mask, "--holdout", "--out", out)

    assert result.exit_code == 0, result.output
    model = json.loads(out.read_text())
    assert model["mask"] == [1, 0, 0, 0, 0, 0, 1, 0, 0, 0]
    manifest = json.loads((tmp_path / "model.json.manifest.json").read_text())
    assert manifest["extra"]["holdout"]["rows"] == 16
    assert manifest["inputs"] == [str(data_csv), str(mask)]


def test_unknown_model_token_is_a_usage_error(data_csv, tmp_path):
    result = invoke("train", "--data", data_csv, "--model", "svm", "--out", tmp_path / "m.json")

    assert result.exit_code == 2
    assert "uregm" in result.output


def test_predict_names_missing_column(linear_csv, tmp_path):
    model = tmp_path / "lir.json"
    assert invoke("train", "--data", linear_csv, "--model", "lir", "--out", model).exit_code == 0
    stripped = tmp_path / "stripped.csv"
    pd.read_csv(linear_csv).drop(columns=["wmc"]).to_csv(stripped, index=False)

    result = invoke("predict", "--model", model, "--data", stripped, "--out", tmp_path / "p.csv")
    assert result.exit_code == 1
    assert "wmc" in result.output
    assert not (tmp_path / "p.csv").exists()


def test_predict_keeps_rows_with_nulls_in_unused_columns(data_csv, tmp_path):
    mask, model = tmp_path / "mask.json", tmp_path / "lir.json"
    mask.write_text(json.dumps([1, 0, 0, 0, 0, 0, 1, 0, 0, 0]))
    assert invoke("train", "--data", data_csv, "--model", "lir", "--mask", mask, "--out", model).exit_code == 0
    frame = pd.read_csv(data_csv)
    frame["fan_in"] = frame["fan_in"].astype(object)
    frame.loc[2, "fan_in"] = "NA"
    holed = tmp_path / "holed.csv"
    frame.to_csv(holed, index=False)

    result = invoke("predict", "--model", model, "--data", holed, "--out", tmp_path / "p.csv")
    assert result.exit_code == 0, result.output
    predictions = pd.read_csv(tmp_path / "p.csv")
    assert list(predictions["sample_id"]) == list(frame["sample_id"])


def test_predict_rejects_null_in_model_column(data_csv, tmp_path):
    model = tmp_path / "lir.json"
    assert invoke("train", "--data", data_csv, "--model", "lir", "--out", model).exit_code == 0
    frame = pd.read_csv(data_csv)
    frame["wmc"] = frame["wmc"].astype(object)
    frame.loc[4, "wmc"] = "NA"
    holed = tmp_path / "holed.csv"
    frame.to_csv(holed, index=False)

    result = invoke("predict", "--model", model, "--data", holed, "--out", tmp_path / "p.csv")
    assert result.exit_code == 1
    assert "row 5" in result.output and "wmc" in result.output
    assert not (tmp_path / "p.csv").exists()


def test_predict_is_repeatable_for_uregm(data_csv, tmp_path):
    model = tmp_path / "model.json"
    assert invoke("train", "--data", data_csv, "--folds", 3, "--out", model, *FAST).exit_code == 0
    first, second = tmp_path / "p1.csv", tmp_path / "p2.csv"
    assert invoke("predict", "--model", model, "--data", data_csv, "--out", first).exit_code == 0
    assert invoke("predict", "--model", model, "--data", data_csv, "--out", second).exit_code == 0

    assert first.read_bytes() == second.read_bytes()
    assert len(pd.read_csv(first)) == 80


def test_evaluate_reports_requested_models(data_csv, tmp_path):
    report = tmp_path / "report.json"
    result = invoke("--no-timing", "evaluate", "--data", data_csv, "--models", "lir,pr,lr,rf,reap,uregm",
                    "--folds", 3, "--seed", 4, "--report", report, "--format", "json", *FAST)

    assert result.exit_code == 0, result.output
    models = json.loads(report.read_text())["models"]
    assert list(models) == ["LiR", "PR", "LR", "RF", "REAP-analogue", "URegM"]
    for label in ["LiR", "PR", "LR", "RF"]:
        assert models["URegM"]["accuracy"] >= models[label]["accuracy"]


def test_evaluate_json_and_csv_agree(data_csv, tmp_path):
    as_json, as_csv = tmp_path / "r.json", tmp_path / "r.csv"
    common = ["--no-timing", "evaluate", "--data", data_csv, "--models", "lir,uregm", "--folds", 3, *FAST]
    assert invoke(*common, "--report", as_json, "--format", "json").exit_code == 0
    assert invoke(*common, "--report", as_csv, "--format", "csv").exit_code == 0

    models = json.loads(as_json.read_text())["models"]
    frame = pd.read_csv(as_csv, float_precision="round_trip").set_index("model")
    for label, metrics in models.items():
        assert frame.loc[label, "mse"] == metrics["mse"]
        assert frame.loc[label, "accuracy"] == metrics["accuracy"]


def test_evaluate_prints_text_table(data_csv):
    result = invoke("evaluate", "--data", data_csv, "--models", "lir,lr", "--folds", 3)

    assert result.exit_code == 0, result.output
    assert "LiR" in result.output and "LR" in result.output
    assert "accuracy (%)" in result.output


def test_evaluate_rejects_unknown_model(data_csv):
    result = invoke("evaluate", "--data", data_csv, "--models", "lir,svm")

    assert result.exit_code == 2
    assert "svm" in result.output


def test_json_error_format(tmp_path):
    result = invoke("--format", "json", "predict", "--model", tmp_path / "none.json",
                    "--data", tmp_path / "none.csv", "--out", tmp_path / "p.csv")

    assert result.exit_code == 1
    error = json.loads([line for line in result.output.splitlines() if line.startswith("{")][-1])
    assert error["exit_code"] == 1
    assert "not found" in error["message"]


def test_config_file_supplies_defaults_and_flags_win(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"gen-data": {"rows": 12, "seed": 3}}))
    from_config, from_flag = tmp_path / "a.csv", tmp_path / "b.csv"

    assert invoke("--config", config, "gen-data", "--out", from_config).exit_code == 0
    assert invoke("--config", config, "gen-data", "--rows", 15, "--out", from_flag).exit_code == 0
    assert len(pd.read_csv(from_config)) == 12
    assert len(pd.read_csv(from_flag)) == 15


def test_version():
    result = invoke("--version")
    assert result.exit_code == 0
    assert "uregm 0.1.0" in result.output


def test_run_returns_usage_exit_code(tmp_path, capsys):
    assert run(["--error-format", "json", "gen-data", "--rows", "5", "--out", str(tmp_path / "d.csv")]) == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["exit_code"] == 2


def test_pipeline_is_deterministic_end_to_end(tmp_path):
    """gen-data, select-features, train and evaluate twice with the same seeds give identical artifacts"""
    outputs = []
    for name in ("first", "second"):
        folder = tmp_path / name
        data, mask, model, report = (folder / "d.csv", folder / "mask.json", folder / "model.json",
                                     folder / "report.json")
        assert invoke("gen-data", "--rows", 60, "--seed", 11, "--out", data).exit_code == 0
        assert invoke("--no-timing", "select-features", "--data", data, "--generations", 3, "--population", 6,
                      "--seed", 11, "--out", mask).exit_code == 0
        assert invoke("--no-timing", "train", "--data", data, "--mask", mask, "--folds", 3, "--seed", 11,
                      "--out", model, *FAST).exit_code == 0
        assert invoke("--no-timing", "evaluate", "--data", data, "--mask", mask, "--folds", 3, "--seed", 11,
                      "--report", report, "--format", "json", "--jobs", 2 if name == "second" else 1,
                      *FAST).exit_code == 0
        outputs.append([p.read_bytes() for p in (data, mask, model, report)])

    assert outputs[0] == outputs[1]


def test_command_format_option_does_not_select_error_format(tmp_path, capsys):
    """Only the global --format decides how errors are printed"""
    assert run(["evaluate", "--data", str(tmp_path / "none.csv"), "--format", "json", "--models", "svm"]) == 2
    assert not capsys.readouterr().err.strip().startswith("{")

    assert run(["--format", "json", "evaluate", "--data", str(tmp_path / "none.csv"), "--format", "csv",
                "--models", "svm"]) == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "UsageError"
    assert "svm" in error["message"]


@pytest.mark.parametrize("fraction", ["0", "1.0"])
def test_train_fraction_bounds_are_usage_errors(data_csv, tmp_path, fraction):
    result = invoke("train", "--data", data_csv, "--model", "lir", "--holdout", "--train-fraction", fraction,
                    "--out", tmp_path / "m.json")

    assert result.exit_code == 2
    assert not (tmp_path / "m.json").exists()


def test_zero_feature_subsample_is_a_usage_error(data_csv, tmp_path):
    result = invoke("train", "--data", data_csv, "--model", "rf", "--rf-feature-subsample", 0,
                    "--out", tmp_path / "m.json")

    assert result.exit_code == 2


def test_elitism_not_below_population_is_a_usage_error(data_csv, tmp_path):
    result = invoke("select-features", "--data", data_csv, "--population", 4, "--elitism", 4,
                    "--out", tmp_path / "mask.json")

    assert result.exit_code == 2
    assert "elitism" in result.output
    assert not (tmp_path / "mask.json").exists()


def test_train_accepts_every_model_token(data_csv, tmp_path):
    out = tmp_path / "reap.json"
    result = invoke("train", "--data", data_csv, "--model", "reap", "--folds", 3, "--out", out, *FAST)

    assert result.exit_code == 0, result.output
    manifest = json.loads((tmp_path / "reap.json.manifest.json").read_text())
    assert manifest["flags"]["model"] == "reap"
    assert json.loads(out.read_text())["label"] == "REAP-analogue"


def test_full_scale_evaluate_is_byte_identical_across_jobs(tmp_path):
    """Every model on 5000 rows with default forests gives the same report with one or four workers"""
    data = tmp_path / "data.csv"
    assert invoke("gen-data", "--rows", 5000, "--seed", 42, "--out", data).exit_code == 0
    reports = []
    for jobs in (1, 4):
        report = tmp_path / f"report-{jobs}.json"
        result = invoke("--no-timing", "evaluate", "--data", data, "--models", "lir,pr,lr,rf,reap,uregm",
                        "--folds", 5, "--seed", 42, "--report", report, "--format", "json", "--jobs", jobs)
        assert result.exit_code == 0, result.output
        reports.append(report.read_bytes())

    assert reports[0] == reports[1]
    assert list(json.loads(reports[0])["models"]) == ["LiR", "PR", "LR", "RF", "REAP-analogue", "URegM"]
