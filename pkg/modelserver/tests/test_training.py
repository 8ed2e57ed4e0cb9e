import hashlib

import pytest

from modelserver.training import TrainingError, train_reference_models

from conftest import SCHEMA_CONFIG, income_csv_text


def test_all_three_families_fit_and_beat_majority(trained):
    assert set(trained["models"]) == {"rf", "gbt", "nn"}
    for name, accuracy in trained["accuracy"].items():
        assert accuracy >= trained["majority_baseline"], name


def test_report_written(trained, income_csv):
    assert trained["arity"] == 4


def test_too_small_dataset_rejected(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text(income_csv_text(rows=20))
    with pytest.raises(TrainingError):
        train_reference_models(path, SCHEMA_CONFIG, tmp_path / "out")


def test_missing_label_column_rejected(tmp_path, income_csv):
    config = dict(SCHEMA_CONFIG, label="salary")
    with pytest.raises(TrainingError):
        train_reference_models(income_csv, config, tmp_path / "out")


def test_fixed_seed_reproduces_identical_model_files(income_csv, tmp_path):
    a = train_reference_models(income_csv, SCHEMA_CONFIG, tmp_path / "a", seed=9)
    b = train_reference_models(income_csv, SCHEMA_CONFIG, tmp_path / "b", seed=9)
    for name in a["models"]:
        digest_a = hashlib.sha256(open(a["models"][name], "rb").read()).hexdigest()
        digest_b = hashlib.sha256(open(b["models"][name], "rb").read()).hexdigest()
        assert digest_a == digest_b, name
