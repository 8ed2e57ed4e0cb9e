import numpy as np
import pytest

from modelserver.training import train_reference_models

SCHEMA_CONFIG = {
    "columns": [
        {"name": "age", "kind": "numeric", "bins": 4},
        {"name": "education", "kind": "categorical"},
        {"name": "hours", "kind": "numeric", "bins": 4},
        {"name": "sector", "kind": "categorical"},
    ],
    "label": "income",
}


def income_csv_text(rows=600, seed=11):
    rng = np.random.default_rng(seed)
    lines = ["age,education,hours,sector,income"]
    for _ in range(rows):
        age = int(rng.integers(18, 70))
        education = rng.choice(["hs", "college", "masters"], p=[0.5, 0.35, 0.15])
        hours = int(rng.integers(10, 60))
        sector = rng.choice(["private", "public", "self"])
        income = "high" if (education != "hs" and hours >= 35) else "low"
        lines.append(f"{age},{education},{hours},{sector},{income}")
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def income_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "income.csv"
    path.write_text(income_csv_text())
    return path


@pytest.fixture(scope="session")
def trained(income_csv, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("models")
    report = train_reference_models(income_csv, SCHEMA_CONFIG, out_dir, seed=3)
    return report
