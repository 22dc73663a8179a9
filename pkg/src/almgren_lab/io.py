"""Small helpers for writing CSV and JSON artifacts."""

import json
import os

import numpy as np


def to_builtin(obj):
    """Recursively convert numpy scalars/arrays and complex numbers to JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def dumps(obj):
    return json.dumps(to_builtin(obj), indent=2, sort_keys=True)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def write_text(directory, name, text):
    path = os.path.join(ensure_dir(directory), name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_json(directory, name, obj):
    return write_text(directory, name, dumps(obj) + "\n")
