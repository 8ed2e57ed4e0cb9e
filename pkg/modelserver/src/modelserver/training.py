"""Fitting the reference classifier family on discretized tabular data.

Models are trained on the same integer feature codes the explainer
perturbs, so their behavior is defined over the entire perturbation space.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier
from sklearn.model_selection import train_test_split
from sklearn.neural_network import MLPClassifier

from anchormem.data import ingest_csv
from anchormem.errors import ExplainerError

from .protocol import save_served_model

MIN_ROWS = 50


class TrainingError(Exception):
    pass


def _model_zoo(seed: int) -> dict:
    return {
        "rf": RandomForestClassifier(n_estimators=100, random_state=seed),
        "gbt": GradientBoostingClassifier(random_state=seed),
        "nn": MLPClassifier(hidden_layer_sizes=(32, 16), max_iter=1000, random_state=seed),
    }


def train_reference_models(
    csv_path: str | Path,
    schema_config: dict,
    out_dir: str | Path,
    *,
    seed: int = 0,
    holdout: float = 0.2,
) -> dict:
    """Fit the RF/GBT/NN family, persist the fitted models, report accuracy.

    Returns ``{"models": {name: path}, "accuracy": {name: float},
    "majority_baseline": float, "arity": int}`` and writes the same report
    to ``out_dir/report.json``.
    """
    try:
        data = ingest_csv(csv_path, schema_config)
    except ExplainerError as exc:
        raise TrainingError(f"cannot ingest training data: {exc}") from exc
    if len(data.instances) < MIN_ROWS:
        raise TrainingError(
            f"need at least {MIN_ROWS} rows to fit reference models, "
            f"got {len(data.instances)}"
        )
    features = np.asarray(data.instances, dtype=np.int64)
    labels = np.asarray(data.labels, dtype=np.int64)
    train_x, test_x, train_y, test_y = train_test_split(
        features, labels, test_size=holdout, random_state=seed, stratify=labels
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    counts = np.bincount(test_y)
    report = {
        "models": {},
        "accuracy": {},
        "majority_baseline": float(counts.max() / counts.sum()),
        "arity": data.schema.arity,
    }
    for name, model in _model_zoo(seed).items():
        model.fit(train_x, train_y)
        accuracy = float((model.predict(test_x) == test_y).mean())
        path = out_dir / f"{name}.joblib"
        save_served_model(model, data.schema.arity, path)
        report["models"][name] = str(path)
        report["accuracy"][name] = accuracy
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report
