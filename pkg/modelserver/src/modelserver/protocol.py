"""The model-serving loop.

One JSON document per line, UTF-8. Request:
``{"id": <int>, "instances": [[<int>, ...], ...]}``. Response:
``{"id": <int>, "labels": [<int>, ...]}`` on success,
``{"id": <int>, "error": "<msg>"}`` on a prediction failure, and
``{"id": -1, "error": ...}`` when the line itself cannot be parsed.
Requests are answered strictly in arrival order; EOF shuts the loop down.
"""

from __future__ import annotations

import json
import socket
import sys
from pathlib import Path

import joblib
import numpy as np


class ServedModel:
    """A fitted classifier plus the arity its feature codes must have."""

    def __init__(self, model, arity: int):
        self.model = model
        self.arity = arity

    def predict(self, instances) -> list[int]:
        batch = np.asarray(instances, dtype=np.int64)
        if batch.ndim != 2 or batch.shape[1] != self.arity:
            raise ValueError(f"expected (n, {self.arity}) feature codes, got {batch.shape}")
        return [int(v) for v in self.model.predict(batch)]


def save_served_model(model, arity: int, path: str | Path) -> None:
    joblib.dump({"model": model, "arity": int(arity)}, path)


def load_served_model(path: str | Path) -> ServedModel:
    payload = joblib.load(path)
    return ServedModel(payload["model"], payload["arity"])


def _respond(served: ServedModel, line: str) -> str:
    try:
        request = json.loads(line)
        request_id = int(request["id"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        return json.dumps({"id": -1, "error": "malformed request line"})
    try:
        labels = served.predict(request["instances"])
    except Exception as exc:  # noqa: BLE001 - any prediction failure becomes a response
        return json.dumps({"id": request_id, "error": str(exc)})
    return json.dumps({"id": request_id, "labels": labels})


def serve_stream(served: ServedModel, reader, writer) -> int:
    """Answer requests from ``reader`` until EOF; returns the request count."""
    handled = 0
    for line in reader:
        if not line.strip():
            continue
        writer.write(_respond(served, line) + "\n")
        writer.flush()
        handled += 1
    return handled


def serve(model_path: str | Path, tcp_port: int | None = None) -> None:
    """Serve a persisted model over stdio, or over one TCP connection."""
    served = load_served_model(model_path)
    if tcp_port is None:
        serve_stream(served, sys.stdin, sys.stdout)
        return
    with socket.create_server(("127.0.0.1", tcp_port)) as listener:
        conn, _ = listener.accept()
        with conn, conn.makefile("r", encoding="utf-8") as reader, conn.makefile(
            "w", encoding="utf-8"
        ) as writer:
            serve_stream(served, reader, writer)
