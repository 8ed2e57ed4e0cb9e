"""Walkthrough: explaining a tabular classifier with anchor rules.

Builds a small income-style dataset, ingests it (quantile bins for numeric
columns, first-seen ids for categorical ones), and explains one prediction
of a rule-based model. The printed anchor is a conjunction of feature
tests: whenever they hold, the model almost always predicts the same label
as it did for the explained row.
"""

import io
import tempfile
from pathlib import Path

import numpy as np

from anchormem import (
    ExplainParams,
    MemoizedExplainer,
    ingest_csv,
    make_builtin,
)

rng = np.random.default_rng(7)

rows = ["age,education,hours,sector,income"]
for _ in range(400):
    age = int(rng.integers(18, 70))
    education = rng.choice(["hs", "college", "masters"], p=[0.5, 0.35, 0.15])
    hours = int(rng.integers(10, 60))
    sector = rng.choice(["private", "public", "self"])
    income = "high" if (education != "hs" and hours >= 35) else "low"
    rows.append(f"{age},{education},{hours},{sector},{income}")

with tempfile.TemporaryDirectory() as tmp:
    csv_path = Path(tmp) / "income.csv"
    csv_path.write_text("\n".join(rows) + "\n")
    data = ingest_csv(
        csv_path,
        {
            "columns": [
                {"name": "age", "kind": "numeric", "bins": 4},
                {"name": "education", "kind": "categorical"},
                {"name": "hours", "kind": "numeric", "bins": 4},
                {"name": "sector", "kind": "categorical"},
            ],
            "label": "income",
        },
    )

print(f"ingested {len(data.instances)} rows, schema:")
for slot in data.schema:
    detail = slot.bin_edges if slot.kind == "numeric" else slot.vocab
    print(f"  {slot.name:10s} {slot.kind:12s} cardinality {slot.cardinality}  {detail}")

# a transparent stand-in for a trained classifier: high income iff
# education is college-or-above AND the hours bin is in the upper half
edu_slot = data.schema[1]
college = edu_slot.vocab.index("college")
masters = edu_slot.vocab.index("masters")
model = make_builtin(
    "conjunction-list",
    {
        "rules": [
            {"when": [[1, college], [2, 2]], "label": 1},
            {"when": [[1, college], [2, 3]], "label": 1},
            {"when": [[1, masters], [2, 2]], "label": 1},
            {"when": [[1, masters], [2, 3]], "label": 1},
        ],
        "default": 0,
    },
)

explainer = MemoizedExplainer(
    model, data.schema, data.distribution, params=ExplainParams(seed=0)
)

x = data.instances[0]
report = explainer.explain(x)

print(f"\nexplaining row 0, feature codes {x}, model label {report.target}")
print("anchor rule:")
for i, v in report.rule.to_pairs():
    slot = data.schema[i]
    shown = slot.vocab[v] if slot.vocab else f"bin {v} (edges {slot.bin_edges})"
    print(f"  {slot.name} = {shown}")
print(
    f"certified precision lower bound {report.precision_lower:.3f}, "
    f"coverage estimate {report.coverage_hat:.3f}, "
    f"{report.model_queries} model queries, path={report.path}"
)
