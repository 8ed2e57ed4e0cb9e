"""Black-box model oracles.

Every explanation path queries models through :class:`ModelOracle`, whose
``query_count`` is the single choke point for sampling-cost accounting.
Built-in deterministic oracles support exact, enumerable test universes;
:class:`ExternalModelClient` talks to an out-of-process model server over a
line-delimited JSON protocol (child-process stdio or a TCP socket).
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
import threading
from typing import Sequence

import numpy as np

from .core import Instance
from .errors import ConfigError, OracleUnavailableError, SchemaError


class ModelOracle:
    """Base class: batch label prediction plus a monotone query counter."""

    def __init__(self, arity: int | None = None):
        self.arity = arity
        self._queries = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._queries

    def predict_batch(self, instances: Sequence[Instance] | np.ndarray) -> np.ndarray:
        batch = np.asarray(instances, dtype=np.int64)
        if batch.ndim == 1:
            batch = batch.reshape(1, -1)
        if self.arity is not None and batch.shape[1] != self.arity:
            raise SchemaError(f"batch arity {batch.shape[1]} != model arity {self.arity}")
        labels = self._predict(batch)
        with self._lock:
            self._queries += batch.shape[0]
        return np.asarray(labels, dtype=np.int64)

    def predict_one(self, x: Instance) -> int:
        return int(self.predict_batch([x])[0])

    def _predict(self, batch: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ConstantModel(ModelOracle):
    def __init__(self, value: int, arity: int | None = None):
        super().__init__(arity)
        self.value = int(value)

    def _predict(self, batch: np.ndarray) -> np.ndarray:
        return np.full(batch.shape[0], self.value)


class SingleFeatureModel(ModelOracle):
    """Label equals the value of one feature slot."""

    def __init__(self, index: int, arity: int | None = None):
        super().__init__(arity)
        self.index = int(index)

    def _predict(self, batch: np.ndarray) -> np.ndarray:
        if self.index >= batch.shape[1]:
            raise SchemaError(f"feature {self.index} out of range for arity {batch.shape[1]}")
        return batch[:, self.index]


class ConjunctionListModel(ModelOracle):
    """First matching conjunction wins; unmatched instances get the default label.

    Each entry is ``(pairs, label)`` with pairs a list of (slot, value).
    """

    def __init__(self, rules: Sequence[tuple[Sequence[Sequence[int]], int]], default: int,
                 arity: int | None = None):
        super().__init__(arity)
        self.entries = [
            (
                np.array([p[0] for p in pairs], dtype=np.intp),
                np.array([p[1] for p in pairs], dtype=np.int64),
                int(label),
            )
            for pairs, label in rules
        ]
        self.default = int(default)

    def _predict(self, batch: np.ndarray) -> np.ndarray:
        labels = np.full(batch.shape[0], self.default)
        unassigned = np.ones(batch.shape[0], dtype=bool)
        for idx, vals, label in self.entries:
            hit = unassigned & (batch[:, idx] == vals).all(axis=1)
            labels[hit] = label
            unassigned &= ~hit
        return labels


class LookupTableModel(ModelOracle):
    """Explicit label for every instance of a finite universe."""

    def __init__(self, cardinalities: Sequence[int], labels: Sequence[int]):
        super().__init__(arity=len(cardinalities))
        self.cardinalities = tuple(int(c) for c in cardinalities)
        size = int(np.prod(self.cardinalities))
        table = np.asarray(labels, dtype=np.int64)
        if table.shape != (size,):
            raise ConfigError(
                f"lookup table needs {size} labels for cardinalities "
                f"{self.cardinalities}, got {table.shape[0]}"
            )
        self.table = table

    def _predict(self, batch: np.ndarray) -> np.ndarray:
        flat = np.ravel_multi_index(batch.T, self.cardinalities)
        return self.table[flat]


_BUILTIN_KINDS = {
    "constant": lambda p: ConstantModel(p["value"], p.get("arity")),
    "single-feature": lambda p: SingleFeatureModel(p["index"], p.get("arity")),
    "conjunction-list": lambda p: ConjunctionListModel(
        [(entry["when"], entry["label"]) for entry in p["rules"]],
        p.get("default", 0),
        p.get("arity"),
    ),
    "lookup-table": lambda p: LookupTableModel(p["cardinalities"], p["labels"]),
}


def make_builtin(kind: str, params: dict) -> ModelOracle:
    """Construct one of the deterministic built-in oracles from plain config."""
    try:
        factory = _BUILTIN_KINDS[kind]
    except KeyError:
        raise ConfigError(
            f"unknown builtin model {kind!r}; choose from {sorted(_BUILTIN_KINDS)}"
        ) from None
    try:
        return factory(params)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad params for builtin {kind!r}: {exc}") from exc


class ExternalModelClient(ModelOracle):
    """Client for a model server speaking one JSON document per line.

    Request:  ``{"id": <int>, "instances": [[<int>, ...], ...]}``
    Response: ``{"id": <int>, "labels": [<int>, ...]}`` or
              ``{"id": <int>, "error": "<msg>"}``

    The transport is either a child process's standard streams (``command``)
    or a TCP connection (``address`` as ``(host, port)``). Requests are
    serialized: one in flight at a time.
    """

    def __init__(
        self,
        command: str | Sequence[str] | None = None,
        address: tuple[str, int] | None = None,
        arity: int | None = None,
    ):
        super().__init__(arity)
        if (command is None) == (address is None):
            raise ConfigError("exactly one of command/address must be given")
        self._next_id = 0
        self._io_lock = threading.Lock()
        self._proc = None
        self._sock = None
        if command is not None:
            argv = shlex.split(command) if isinstance(command, str) else list(command)
            try:
                self._proc = subprocess.Popen(
                    argv,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                )
            except OSError as exc:
                raise OracleUnavailableError(f"cannot start model server: {exc}") from exc
            self._writer = self._proc.stdin
            self._reader = self._proc.stdout
        else:
            try:
                self._sock = socket.create_connection(address)
            except OSError as exc:
                raise OracleUnavailableError(f"cannot connect to {address}: {exc}") from exc
            self._writer = self._sock.makefile("w", encoding="utf-8")
            self._reader = self._sock.makefile("r", encoding="utf-8")

    def _predict(self, batch: np.ndarray) -> np.ndarray:
        with self._io_lock:
            self._next_id += 1
            request_id = self._next_id
            payload = json.dumps({"id": request_id, "instances": batch.tolist()})
            try:
                self._writer.write(payload + "\n")
                self._writer.flush()
                line = self._reader.readline()
            except (OSError, ValueError) as exc:
                raise OracleUnavailableError(f"model server transport failed: {exc}") from exc
        if not line:
            raise OracleUnavailableError("model server closed the connection")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise OracleUnavailableError(f"unparseable server response: {line!r}") from exc
        if response.get("error") is not None:
            raise OracleUnavailableError(f"model server error: {response['error']}")
        if response.get("id") != request_id:
            raise OracleUnavailableError(
                f"response id {response.get('id')} does not match request {request_id}"
            )
        labels = response.get("labels")
        if not isinstance(labels, list) or len(labels) != batch.shape[0]:
            raise OracleUnavailableError("server returned a malformed label list")
        return np.asarray(labels)

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.wait(timeout=10)
            self._proc = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self) -> "ExternalModelClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
