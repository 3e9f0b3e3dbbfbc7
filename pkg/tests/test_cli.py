"""End-to-end command line tests, run in process through cli.main."""

import csv
import hashlib
import json
from pathlib import Path

import pytest

from timetrail.cli import main
from timetrail.enrich import ATTRIBUTE_NAMES
from timetrail.pipeline import STAGES


def tiny_config(out_dir, seed=0):
    # one month, 1200 rows: big enough to train on, small enough for tests
    return {
        "seed": seed,
        "out_dir": str(out_dir),
        "generator": {
            "n_users": 40,
            "n_terminals": 8,
            "target_rows": 1200,
            "fraud_rate": 0.02,
            "period": [1672531200, 1675123200],
            "seed": 7,
        },
        "correlation": {"window_seconds": 86400, "stride_seconds": 86400},
        "top_k_explanations": 2,
    }


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    """One complete pipeline run shared by the read-only assertions below."""
    tmp = tmp_path_factory.mktemp("cli_full")
    out = tmp / "out"
    cfg = write_config(tmp, tiny_config(out))
    code = main(["run-all", "--config", cfg])
    assert code == 0
    return out


# ---------------------------------------------------------------------------
# happy paths


def test_generate_writes_exact_fraud_count(tmp_path):
    out = tmp_path / "out"
    doc = tiny_config(out)
    doc["generator"]["target_rows"] = 10_000
    doc["generator"]["fraud_rate"] = 0.0013
    cfg = write_config(tmp_path, doc)
    assert main(["generate", "--config", cfg]) == 0
    with open(out / "dataset.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10_000
    assert sum(1 for r in rows if r["label"] == "fraud") == 13


def test_run_all_writes_manifest_with_true_hashes(full_run):
    manifest = json.loads((full_run / "manifest.json").read_text(encoding="utf-8"))
    assert len(manifest) > 20
    names = {e["path"] for e in manifest}
    assert "manifest.json" not in names  # the manifest never lists itself
    for entry in manifest:
        blob = (full_run / entry["path"]).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == entry["sha256"]
        assert entry["stage"] in STAGES


def test_expected_artifacts_exist(full_run):
    for name in (
        "dataset.csv",
        "cleansed.csv",
        "cleanse_report.json",
        "split_train.csv",
        "enriched_test.csv",
        "heatmap_all.csv",
        "heatmap_all.json",
        "heatmap_all.svg",
        "dynamic_corr.csv",
        "model_baseline.json",
        "model_timetrail.json",
        "eval_baseline.json",
        "eval_timetrail.json",
        "comparison.csv",
        "comparison.txt",
        "tis_report.json",
        "flag_series.csv",
        "flag_series.svg",
        "tis_hist.csv",
        "tis_hist.svg",
    ):
        assert (full_run / name).exists(), name


def test_baseline_model_sees_no_temporal_features(full_run):
    base = json.loads((full_run / "model_baseline.json").read_text(encoding="utf-8"))
    rich = json.loads((full_run / "model_timetrail.json").read_text(encoding="utf-8"))
    assert base["type"] == "logistic"
    assert rich["type"] == "gbt"
    assert not set(base["feature_names"]) & set(ATTRIBUTE_NAMES)
    assert set(ATTRIBUTE_NAMES) <= set(rich["feature_names"])


def test_comparison_csv_lists_all_metrics(full_run):
    lines = (full_run / "comparison.csv").read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "metric,baseline,timetrail"
    assert len(lines) == 8  # seven metrics under the header
    assert {ln.split(",")[0] for ln in lines[1:]} == {
        "accuracy", "precision", "recall", "f1", "auc_roc", "average_precision", "tis",
    }


def test_explanations_cover_top_flagged(full_run):
    sequences = sorted(full_run.glob("sequence_*.json"))
    assert len(sequences) <= 2  # top_k_explanations
    for path in sequences:
        doc = json.loads(path.read_text(encoding="utf-8"))
        assert doc["probability"] >= 0.5
        assert path.with_suffix(".svg").exists()


def test_stagewise_run_reproduces_run_all(full_run, tmp_path):
    out = tmp_path / "stagewise"
    cfg = write_config(tmp_path, tiny_config(out))
    for stage in STAGES:
        assert main([stage.replace("_", "-"), "--config", cfg]) == 0
    for name in ("dataset.csv", "enriched_test.csv", "comparison.csv", "tis_report.json"):
        assert (out / name).read_bytes() == (full_run / name).read_bytes()


def test_run_all_is_reproducible(tmp_path):
    cfg_a = write_config(tmp_path, tiny_config(tmp_path / "a"), "a.json")
    cfg_b = write_config(tmp_path, tiny_config(tmp_path / "b"), "b.json")
    assert main(["run-all", "--config", cfg_a]) == 0
    assert main(["run-all", "--config", cfg_b]) == 0
    a = (tmp_path / "a" / "manifest.json").read_bytes()
    b = (tmp_path / "b" / "manifest.json").read_bytes()
    assert a == b


def test_seed_override_changes_generated_data(tmp_path):
    doc = tiny_config(tmp_path / "x")
    del doc["generator"]["seed"]  # let the run seed cascade into the generator
    cfg = write_config(tmp_path, doc)
    assert main(["generate", "--config", cfg]) == 0
    first = (tmp_path / "x" / "dataset.csv").read_bytes()
    assert main(["generate", "--config", cfg, "--seed", "99"]) == 0
    assert (tmp_path / "x" / "dataset.csv").read_bytes() != first


def test_out_override_redirects_artifacts(tmp_path):
    cfg = write_config(tmp_path, tiny_config(tmp_path / "ignored"))
    assert main(["generate", "--config", cfg, "--out", str(tmp_path / "elsewhere")]) == 0
    assert (tmp_path / "elsewhere" / "dataset.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_ingests_existing_csv(tmp_path, full_run):
    doc = tiny_config(tmp_path / "out2")
    doc["input_csv"] = str(full_run / "dataset.csv")
    cfg = write_config(tmp_path, doc)
    assert main(["generate", "--config", cfg]) == 0
    assert (tmp_path / "out2" / "dataset.csv").read_bytes() == (
        full_run / "dataset.csv"
    ).read_bytes()


# ---------------------------------------------------------------------------
# failure modes


def test_unknown_config_field_names_the_culprit(tmp_path, capsys):
    doc = tiny_config(tmp_path / "out")
    doc["generator"]["n_userz"] = 5
    cfg = write_config(tmp_path, doc)
    assert main(["generate", "--config", cfg]) == 1
    err = capsys.readouterr().err
    assert "generator.n_userz" in err


def test_unknown_top_level_field(tmp_path, capsys):
    doc = tiny_config(tmp_path / "out")
    doc["thresholdz"] = 0.5
    cfg = write_config(tmp_path, doc)
    assert main(["run-all", "--config", cfg]) == 1
    assert "thresholdz" in capsys.readouterr().err


def test_invalid_json_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["run-all", "--config", str(path)]) == 1
    assert "not valid JSON" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run-all", "--config", str(tmp_path / "nope.json")]) == 2


def test_stage_without_inputs_fails_cleanly(tmp_path, capsys):
    cfg = write_config(tmp_path, tiny_config(tmp_path / "empty"))
    assert main(["evaluate", "--config", cfg]) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_subcommand_is_a_usage_error(tmp_path):
    cfg = write_config(tmp_path, tiny_config(tmp_path / "out"))
    with pytest.raises(SystemExit) as exc:
        main(["defraud", "--config", cfg])
    assert exc.value.code == 2


def test_bad_threshold_rejected_before_any_work(tmp_path, capsys):
    doc = tiny_config(tmp_path / "out")
    doc["threshold"] = 1.5
    cfg = write_config(tmp_path, doc)
    assert main(["run-all", "--config", cfg]) == 1
    assert "threshold" in capsys.readouterr().err
    assert not Path(tmp_path / "out").exists()
