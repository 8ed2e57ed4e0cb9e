"""Dataset ingestion: feature schemas, discretization and empirical marginals.

Raw CSV columns are mapped to small integer codes (quantile-bin index for
numeric columns, first-seen id for categorical ones) so that the whole
perturbation space is finite. Text corpora become fixed-arity token-id
tuples padded with a reserved code, with per-token vectors supplied by an
external embedding-table file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Instance, Label
from .errors import ConfigError, DomainError, IngestionError, SchemaError

PAD_TOKEN = "<pad>"

NUMERIC = "numeric"
CATEGORICAL = "categorical"
TOKEN = "token"

DEFAULT_BINS = 4


@dataclass(frozen=True)
class SlotSpec:
    """Descriptor of one feature slot."""

    name: str
    kind: str
    cardinality: int
    bin_edges: tuple[float, ...] = ()
    vocab: tuple[str, ...] = ()
    other_code: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in (NUMERIC, CATEGORICAL, TOKEN):
            raise ConfigError(f"unknown slot kind {self.kind!r}")
        if self.kind == NUMERIC:
            if any(b >= a for a, b in zip(self.bin_edges[1:], self.bin_edges)):
                raise ConfigError(f"bin edges of {self.name!r} must be strictly increasing")
            if self.cardinality != len(self.bin_edges):
                raise ConfigError(f"{self.name!r}: cardinality must equal the bin count")

    def bin_midpoint(self, code: int) -> float:
        """Representative raw value of a numeric bin, used for feature distances."""
        edges = self.bin_edges
        if code == 0:
            return edges[0]
        return (edges[code - 1] + edges[code]) / 2.0


@dataclass(frozen=True)
class FeatureSchema:
    slots: tuple[SlotSpec, ...]

    @property
    def arity(self) -> int:
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots)

    def __getitem__(self, i: int) -> SlotSpec:
        return self.slots[i]

    def validate_instance(self, x: Instance) -> None:
        if len(x) != self.arity:
            raise SchemaError(f"instance arity {len(x)} != schema arity {self.arity}")
        for i, value in enumerate(x):
            if not 0 <= value < self.slots[i].cardinality:
                raise SchemaError(
                    f"value {value} outside domain of slot {i} "
                    f"({self.slots[i].name!r}, cardinality {self.slots[i].cardinality})"
                )

    def describe(self) -> dict:
        return {
            "slots": [
                {
                    "name": s.name,
                    "kind": s.kind,
                    "cardinality": s.cardinality,
                    "bin_edges": list(s.bin_edges),
                    "vocab": list(s.vocab),
                }
                for s in self.slots
            ]
        }

    def hash(self) -> str:
        payload = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


class EmpiricalDistribution:
    """Per-slot value frequencies over the training split.

    Backs both the perturbation sampler (value pools) and the tabular
    embedding (per-slot code mean and standard deviation).
    """

    def __init__(self, schema: FeatureSchema, counts: Sequence[np.ndarray]):
        if len(counts) != schema.arity:
            raise SchemaError("one count vector per slot required")
        self.schema = schema
        self.probs: list[np.ndarray] = []
        self.pools: list[np.ndarray] = []
        self.pool_probs: list[np.ndarray] = []
        for i, count in enumerate(counts):
            count = np.asarray(count, dtype=np.float64)
            if count.shape != (schema[i].cardinality,):
                raise SchemaError(
                    f"slot {i}: expected {schema[i].cardinality} counts, got {count.shape}"
                )
            total = count.sum()
            if total <= 0:
                raise IngestionError(f"slot {i} has no observed values")
            p = count / total
            if abs(p.sum() - 1.0) > 1e-9:
                raise IngestionError(f"slot {i} frequencies do not normalize")
            self.probs.append(p)
            support = np.flatnonzero(count)
            self.pools.append(support.astype(np.int64))
            self.pool_probs.append(p[support] / p[support].sum())
        self.code_means = np.array([float(np.arange(len(p)) @ p) for p in self.probs])
        self.code_stds = np.array(
            [
                math.sqrt(float(p @ (np.arange(len(p)) - m) ** 2))
                for p, m in zip(self.probs, self.code_means)
            ]
        )

    @classmethod
    def from_instances(
        cls, schema: FeatureSchema, instances: Sequence[Instance]
    ) -> "EmpiricalDistribution":
        matrix = instances_to_matrix(instances)
        counts = [
            np.bincount(matrix[:, i], minlength=schema[i].cardinality)
            for i in range(schema.arity)
        ]
        return cls(schema, counts)

    @classmethod
    def uniform(cls, schema: FeatureSchema) -> "EmpiricalDistribution":
        return cls(schema, [np.ones(s.cardinality) for s in schema])

    def slot_probability(self, slot: int, value: int) -> float:
        return float(self.probs[slot][value])


def instances_to_matrix(instances: Sequence[Instance]) -> np.ndarray:
    matrix = np.asarray(instances, dtype=np.int64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    return matrix


def quantile_edges(values: Sequence[float], bins: int) -> tuple[float, ...]:
    """Upper bin edges at the 1/bins .. bins/bins quantiles, deduplicated."""
    if bins < 1:
        raise ConfigError(f"bins must be positive, got {bins}")
    qs = np.arange(1, bins + 1) / bins
    edges = np.unique(np.quantile(np.asarray(values, dtype=float), qs))
    return tuple(float(e) for e in edges)


def discretize(raw, slot: SlotSpec, strict: bool = True) -> int:
    """Map one raw value onto the slot's integer code.

    Numeric slots take the first bin whose upper edge is >= raw; values
    beyond the last edge fall into the last bin. Categorical slots look the
    label up in the vocabulary; unknown labels raise in strict mode and map
    to the reserved "other" code otherwise.
    """
    if slot.kind == NUMERIC:
        edges = np.asarray(slot.bin_edges)
        code = int(np.searchsorted(edges, float(raw), side="left"))
        return min(code, slot.cardinality - 1)
    label = str(raw)
    try:
        return slot.vocab.index(label)
    except ValueError:
        if strict or slot.other_code is None:
            raise DomainError(f"unknown category {label!r} for slot {slot.name!r}") from None
        return slot.other_code


def parse_schema_config(config: dict) -> tuple[list[dict], str]:
    """Validate the {"columns": [...], "label": name} schema config shape."""
    try:
        columns = config["columns"]
        label = config["label"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"schema config missing field: {exc}") from exc
    for col in columns:
        if "name" not in col or "kind" not in col:
            raise ConfigError(f"column entry {col!r} needs 'name' and 'kind'")
        if col["kind"] not in (NUMERIC, CATEGORICAL):
            raise ConfigError(f"column kind must be numeric or categorical, got {col['kind']!r}")
    return list(columns), str(label)


@dataclass
class IngestResult:
    schema: FeatureSchema
    instances: list[Instance]
    labels: list[Label]
    label_names: tuple[str, ...]
    distribution: EmpiricalDistribution
    dropped_rows: int = 0


def ingest_csv(
    path: str | Path,
    schema_config: dict,
    *,
    reserve_other: bool = False,
) -> IngestResult:
    """Read a headered CSV and return discretized instances plus marginals.

    Rows with unparseable numeric cells are dropped and counted. The label
    column is encoded with first-seen ids like any categorical column.
    """
    columns, label_name = parse_schema_config(schema_config)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if label_name not in header:
        raise IngestionError(f"label column {label_name!r} not in header {header}")
    if not rows:
        raise IngestionError(f"{path}: no data rows")

    feature_cols = [c for c in columns if c["name"] != label_name]
    for col in feature_cols:
        if col["name"] not in header:
            raise IngestionError(f"declared column {col['name']!r} not in header")
    positions = [header.index(c["name"]) for c in feature_cols]
    label_pos = header.index(label_name)

    kept: list[list[str]] = []
    kept_labels: list[str] = []
    dropped = 0
    for row in rows:
        if len(row) != len(header):
            dropped += 1
            continue
        cells = [row[p] for p in positions]
        ok = True
        for col, cell in zip(feature_cols, cells):
            if col["kind"] == NUMERIC:
                try:
                    float(cell)
                except ValueError:
                    ok = False
                    break
        if ok:
            kept.append(cells)
            kept_labels.append(row[label_pos])
        else:
            dropped += 1
    if not kept:
        raise IngestionError(f"{path}: all {dropped} rows dropped")

    slots: list[SlotSpec] = []
    for j, col in enumerate(feature_cols):
        raw = [r[j] for r in kept]
        if col["kind"] == NUMERIC:
            edges = quantile_edges([float(v) for v in raw], col.get("bins", DEFAULT_BINS))
            slots.append(SlotSpec(col["name"], NUMERIC, len(edges), bin_edges=edges))
        else:
            vocab: list[str] = []
            for v in raw:
                if v not in vocab:
                    vocab.append(v)
            other = len(vocab) if reserve_other else None
            slots.append(
                SlotSpec(
                    col["name"],
                    CATEGORICAL,
                    len(vocab) + (1 if reserve_other else 0),
                    vocab=tuple(vocab),
                    other_code=other,
                )
            )
    schema = FeatureSchema(tuple(slots))

    instances = [
        tuple(discretize(cell, slot) for cell, slot in zip(r, schema)) for r in kept
    ]
    label_vocab: list[str] = []
    for v in kept_labels:
        if v not in label_vocab:
            label_vocab.append(v)
    labels = [label_vocab.index(v) for v in kept_labels]
    distribution = EmpiricalDistribution.from_instances(schema, instances)
    return IngestResult(schema, instances, labels, tuple(label_vocab), distribution, dropped)


class EmbeddingTable:
    """Token vocabulary with one fixed-dimension vector per token."""

    def __init__(self, tokens: Sequence[str], vectors: np.ndarray):
        if len(tokens) != vectors.shape[0]:
            raise ConfigError("one vector per token required")
        self.tokens = tuple(tokens)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self.ids) != len(self.tokens):
            raise IngestionError("duplicate token in embedding table")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def pad_code(self) -> int:
        return self.size

    def nearest(self, token_id: int, k: int) -> np.ndarray:
        """Ids of the k nearest tokens by embedding distance, self included."""
        deltas = self.vectors - self.vectors[token_id]
        d2 = np.einsum("ij,ij->i", deltas, deltas)
        order = np.argsort(d2, kind="stable")
        return order[: min(k, self.size)]

    def token_distance(self, a: int, b: int) -> float:
        return float(np.linalg.norm(self.vectors[a] - self.vectors[b]))


def load_embedding_table(path: str | Path) -> EmbeddingTable:
    """Parse a ``token<TAB>v1 v2 ... vd`` file with a fixed d per file."""
    tokens: list[str] = []
    rows: list[list[float]] = []
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                token, rest = line.split("\t", 1)
                values = [float(v) for v in rest.split()]
            except ValueError:
                raise IngestionError(f"{path}:{lineno}: malformed embedding line") from None
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise IngestionError(
                    f"{path}:{lineno}: dimension {len(values)} != {dim}"
                )
            tokens.append(token)
            rows.append(values)
    if not tokens:
        raise IngestionError(f"{path}: empty embedding table")
    return EmbeddingTable(tokens, np.array(rows))


def token_schema(table: EmbeddingTable, arity: int) -> FeatureSchema:
    """Fixed-arity schema of token slots; the last code is the padding token."""
    vocab = table.tokens + (PAD_TOKEN,)
    slot = lambda i: SlotSpec(f"t{i}", TOKEN, table.size + 1, vocab=vocab)
    return FeatureSchema(tuple(slot(i) for i in range(arity)))


def ingest_text(
    lines: Iterable[str], table: EmbeddingTable, arity: int, *, strict: bool = False
) -> list[Instance]:
    """Encode whitespace-tokenized lines as padded/truncated token-id tuples."""
    pad = table.pad_code
    instances = []
    for line in lines:
        ids = []
        for tok in line.split():
            if tok in table.ids:
                ids.append(table.ids[tok])
            elif strict:
                raise DomainError(f"token {tok!r} not in embedding table")
        ids = ids[:arity]
        instances.append(tuple(ids) + (pad,) * (arity - len(ids)))
    return instances
