"""Training service for the external fitness protocol.

Builds a torch model from a canonical graph description, trains it
with Adam on a local image dataset and answers newline-delimited JSON
requests with test-part accuracy.
"""

from .data import (DatasetSpec, load_dataset, make_random_labels,
                   make_separable, save_dataset)
from .model import BridgeError, build_model
from .server import Bridge, serve_stdio, serve_tcp

__version__ = "0.1.0"

__all__ = [
    "Bridge",
    "BridgeError",
    "DatasetSpec",
    "build_model",
    "load_dataset",
    "make_random_labels",
    "make_separable",
    "save_dataset",
    "serve_stdio",
    "serve_tcp",
]
