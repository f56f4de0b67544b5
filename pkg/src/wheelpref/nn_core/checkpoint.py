"""Checkpoint serialization: JSON with explicit shapes and float64 values.

Python's repr of a float round-trips the exact binary value, so saving
through json and loading back is bit-exact.
"""

import json

import numpy as np

from .autodiff import Tensor


def save_checkpoint(path, params, metadata=None):
    doc = {
        "metadata": dict(metadata or {}),
        "params": {
            name: {"shape": list(p.data.shape), "data": p.data.reshape(-1).tolist()}
            for name, p in params.items()
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_checkpoint(path):
    """Returns (params, metadata) with params as name -> Tensor (requires_grad)."""
    with open(path) as f:
        doc = json.load(f)
    params = {}
    for name, entry in doc["params"].items():
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        params[name] = Tensor(arr, requires_grad=True)
    return params, doc.get("metadata", {})
