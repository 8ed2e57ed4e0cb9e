"""Memory of intermediate rules with embedding-based retrieval.

Entries pair an explained instance (and its embedding) with the
intermediate rule captured during its explanation. Retrieval returns the
entry whose embedding is nearest in Euclidean distance, via a k-d tree
over the indexed prefix plus a linear scan over the recently inserted
tail; the tree is rebuilt every ``rebuild_every`` inserts. Distance ties
resolve to the lowest insertion index, matching a full linear scan.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .core import Instance, Rule
from .data import EmbeddingTable, EmpiricalDistribution, FeatureSchema, TOKEN
from .errors import (
    EmbeddingError,
    IncompatibleMemoryError,
    MemoryStoreError,
    RuleCoverageError,
)

SIMILARITY_MAPS: dict[str, Callable[[float], float]] = {
    "inverse": lambda d: 1.0 / (1.0 + d),
    "exp": lambda d: math.exp(-d),
}


class Embedder:
    """Maps instances to the fixed-dimension vectors used for retrieval.

    Tabular instances embed as per-slot z-scored codes (training-split mean
    and standard deviation; zero-variance slots map to 0). Token instances
    embed as the mean embedding-table vector of their non-padding tokens.
    """

    def __init__(
        self,
        schema: FeatureSchema,
        distribution: EmpiricalDistribution | None = None,
        table: EmbeddingTable | None = None,
    ):
        self.schema = schema
        self.is_text = any(s.kind == TOKEN for s in schema)
        if self.is_text:
            if table is None:
                raise EmbeddingError("token schema requires an embedding table")
            self.table = table
            self.dim = table.dim
        else:
            if distribution is None:
                raise EmbeddingError("tabular embedding requires training marginals")
            self.means = distribution.code_means
            stds = distribution.code_stds
            safe = np.where(stds > 0, stds, 1.0)
            self._scale = np.where(stds > 0, 1.0 / safe, 0.0)
            self.dim = schema.arity

    def embed(self, x: Instance) -> np.ndarray:
        self.schema.validate_instance(x)
        if self.is_text:
            ids = [v for v in x if v != self.table.pad_code]
            if not ids:
                raise EmbeddingError("cannot embed an all-padding instance")
            return self.table.vectors[ids].mean(axis=0)
        return (np.asarray(x, dtype=np.float64) - self.means) * self._scale


def embed(x: Instance, embedder: Embedder) -> np.ndarray:
    return embedder.embed(x)


@dataclass(frozen=True)
class MemoryEntry:
    embedding: np.ndarray
    instance: Instance
    mid_rule: Rule
    insertion_index: int


def _dist2(p: np.ndarray, q: np.ndarray) -> float:
    d = p - q
    return float((d * d).sum())


class _KDNode:
    __slots__ = ("index", "axis", "left", "right")

    def __init__(self, index: int, axis: int):
        self.index = index
        self.axis = axis
        self.left: "_KDNode | None" = None
        self.right: "_KDNode | None" = None


class KDTree:
    """Median-split k-d tree over a fixed point matrix.

    ``nearest`` returns the (squared distance, point index) pair that is
    lexicographically minimal, so equidistant points resolve to the lowest
    index regardless of tree shape.
    """

    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("points must be a (count, dim) matrix")
        self.dim = self.points.shape[1]
        indices = np.arange(self.points.shape[0])
        self.root = self._build(indices, 0)

    def _build(self, indices: np.ndarray, depth: int) -> _KDNode | None:
        if indices.size == 0:
            return None
        axis = depth % self.dim
        order = indices[np.argsort(self.points[indices, axis], kind="stable")]
        mid = order.size // 2
        node = _KDNode(int(order[mid]), axis)
        node.left = self._build(order[:mid], depth + 1)
        node.right = self._build(order[mid + 1 :], depth + 1)
        return node

    def nearest(self, query: np.ndarray) -> tuple[float, int]:
        if self.root is None:
            raise ValueError("empty tree")
        best = (math.inf, -1)

        def visit(node: _KDNode | None) -> None:
            nonlocal best
            if node is None:
                return
            point = self.points[node.index]
            candidate = (_dist2(point, query), node.index)
            if candidate < best:
                best = candidate
            diff = query[node.axis] - point[node.axis]
            near, far = (node.left, node.right) if diff < 0 else (node.right, node.left)
            visit(near)
            # The far side may still hold an equidistant lower-index point.
            if diff * diff <= best[0]:
                visit(far)

        visit(self.root)
        return best


class MemoryStore:
    """Append-only set of (instance, intermediate rule) entries.

    Safe for many concurrent readers or one writer; retrieval never sees a
    partially inserted entry because entries are appended after validation.
    """

    def __init__(
        self,
        embedder: Embedder | None = None,
        *,
        dim: int | None = None,
        schema_hash: str = "",
        capacity: int | None = None,
        similarity: str = "inverse",
        rebuild_every: int = 64,
    ):
        if embedder is None and dim is None:
            raise MemoryStoreError("either an embedder or an explicit dim is required")
        if similarity not in SIMILARITY_MAPS:
            raise MemoryStoreError(f"unknown similarity map {similarity!r}")
        if capacity is not None and capacity < 1:
            raise MemoryStoreError("capacity must be positive when set")
        self.embedder = embedder
        self.dim = embedder.dim if embedder is not None else dim
        self.schema_hash = schema_hash
        self.capacity = capacity
        self.similarity_name = similarity
        self._similarity = SIMILARITY_MAPS[similarity]
        self.rebuild_every = rebuild_every
        self.entries: list[MemoryEntry] = []
        self._next_index = 0
        self._tree: KDTree | None = None
        self._indexed = 0

    def __len__(self) -> int:
        return len(self.entries)

    def insert(
        self, x: Instance, mid_rule: Rule, embedding: np.ndarray | None = None
    ) -> MemoryEntry:
        if not mid_rule.evaluate(x):
            raise RuleCoverageError(f"{mid_rule} does not cover the stored instance")
        if embedding is None:
            if self.embedder is None:
                raise MemoryStoreError("store has no embedder; pass an embedding")
            embedding = self.embedder.embed(x)
        embedding = np.asarray(embedding, dtype=np.float64)
        if embedding.shape != (self.dim,):
            raise MemoryStoreError(
                f"embedding dimension {embedding.shape} != store dimension {self.dim}"
            )
        entry = MemoryEntry(embedding, tuple(x), mid_rule, self._next_index)
        self._next_index += 1
        self.entries.append(entry)
        if self.capacity is not None and len(self.entries) > self.capacity:
            self.entries.pop(0)
            self._tree = None
            self._indexed = 0
        if len(self.entries) - self._indexed >= self.rebuild_every:
            self._rebuild()
        return entry

    def _rebuild(self) -> None:
        if self.entries:
            self._tree = KDTree(np.stack([e.embedding for e in self.entries]))
        else:
            self._tree = None
        self._indexed = len(self.entries)

    def find_nearest(self, embedding: np.ndarray) -> tuple[MemoryEntry, float] | None:
        """Entry with minimal embedding distance, mapped to a similarity score."""
        embedding = np.asarray(embedding, dtype=np.float64)
        if embedding.shape != (self.dim,):
            raise MemoryStoreError(
                f"query dimension {embedding.shape} != store dimension {self.dim}"
            )
        if not self.entries:
            return None
        best: tuple[float, int] = (math.inf, -1)
        if self._tree is not None and self._indexed > 0:
            best = self._tree.nearest(embedding)
        for pos in range(self._indexed, len(self.entries)):
            d2 = _dist2(self.entries[pos].embedding, embedding)
            if (d2, pos) < best:
                best = (d2, pos)
        entry = self.entries[best[1]]
        return entry, self._similarity(math.sqrt(best[0]))

    def find_most_similar(self, x: Instance) -> tuple[MemoryEntry, float] | None:
        if self.embedder is None:
            raise MemoryStoreError("store has no embedder; use find_nearest")
        return self.find_nearest(self.embedder.embed(x))

    def persist(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            header = {"dim": self.dim, "schema_hash": self.schema_hash, "count": len(self)}
            fh.write(json.dumps(header) + "\n")
            for entry in self.entries:
                fh.write(
                    json.dumps(
                        {
                            "emb": entry.embedding.tolist(),
                            "x": list(entry.instance),
                            "rule": entry.mid_rule.to_pairs(),
                            "idx": entry.insertion_index,
                        }
                    )
                    + "\n"
                )

    @classmethod
    def load(
        cls,
        path: str | Path,
        embedder: Embedder | None = None,
        *,
        schema_hash: str = "",
        capacity: int | None = None,
        similarity: str = "inverse",
        rebuild_every: int = 64,
    ) -> "MemoryStore":
        with open(path, encoding="utf-8") as fh:
            try:
                header = json.loads(fh.readline())
            except json.JSONDecodeError as exc:
                raise IncompatibleMemoryError(f"{path}: bad header") from exc
            store = cls(
                embedder,
                dim=header.get("dim"),
                schema_hash=header.get("schema_hash", ""),
                capacity=capacity,
                similarity=similarity,
                rebuild_every=rebuild_every,
            )
            if embedder is not None and embedder.dim != header.get("dim"):
                raise IncompatibleMemoryError(
                    f"persisted dim {header.get('dim')} != embedder dim {embedder.dim}"
                )
            if schema_hash and header.get("schema_hash") != schema_hash:
                raise IncompatibleMemoryError(
                    f"persisted schema hash {header.get('schema_hash')!r} != {schema_hash!r}"
                )
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                entry = MemoryEntry(
                    np.array(record["emb"], dtype=np.float64),
                    tuple(record["x"]),
                    Rule.from_pairs(record["rule"]),
                    int(record["idx"]),
                )
                store.entries.append(entry)
            if store.entries:
                store._next_index = max(e.insertion_index for e in store.entries) + 1
            if int(header.get("count", len(store.entries))) != len(store.entries):
                raise IncompatibleMemoryError(
                    f"{path}: header count {header.get('count')} != {len(store.entries)} entries"
                )
            store._rebuild()
        return store
