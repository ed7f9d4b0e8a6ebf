"""Checkpoint files: a versioned .npz holding parameter arrays plus JSON metadata.

Layout (stable across versions):
  __format_version__      scalar int array, currently 1
  __meta__                JSON string (config snapshot, target normalization, extras)
  param/<dotted path>     one float array per trainable parameter
"""

from __future__ import annotations

import json

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(path, params, meta=None):
    arrays = {f"param/{p}": a for p, a in params.state_arrays().items()}
    arrays["__format_version__"] = np.asarray(FORMAT_VERSION)
    arrays["__meta__"] = np.asarray(json.dumps(meta or {}))
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Returns (arrays: path->ndarray, meta: dict)."""
    with np.load(path, allow_pickle=False) as z:
        version = int(z["__format_version__"])
        if version > FORMAT_VERSION:
            raise ValueError(f"checkpoint format version {version} is newer than supported {FORMAT_VERSION}")
        meta = json.loads(str(z["__meta__"]))
        arrays = {k[len("param/"):]: z[k] for k in z.files if k.startswith("param/")}
    return arrays, meta
