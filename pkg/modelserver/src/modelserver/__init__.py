"""Reference tabular classifiers served over a line-delimited JSON protocol."""

from .protocol import load_served_model, serve, serve_stream
from .training import TrainingError, train_reference_models

__all__ = [
    "TrainingError",
    "load_served_model",
    "serve",
    "serve_stream",
    "train_reference_models",
]
