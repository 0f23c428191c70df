"""Deterministic CSV / JSON writers and the output manifest.

Floats are written with ``%.17g`` so a value survives a round trip
bit-for-bit, and JSON keys are sorted; identical inputs therefore give
byte-identical files.
"""

import hashlib
import json
from pathlib import Path

import numpy as np


def _fmt(v):
    return "%.17g" % v


def sha256_of(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and complex numbers."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


class OutputDir:
    """Writes files under one root and keeps the manifest of what it wrote."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def _register(self, path, kind):
        self.files.append({"path": str(path.relative_to(self.root)), "kind": kind,
                           "sha256": sha256_of(path), "bytes": path.stat().st_size})

    def write_csv(self, name, header, columns, meta=None):
        """One column per array; complex columns must already be split."""
        path = self.root / name
        cols = [np.asarray(c).ravel() for c in columns]
        n = cols[0].size
        if any(c.size != n for c in cols):
            raise ValueError("CSV columns differ in length")
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in zip(*cols):
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        self._register(path, "csv")
        if meta is not None:
            self.write_json(Path(name).with_suffix(".json").name, meta, kind="sidecar")
        return path

    def write_matrix_csv(self, name, x, xp, M, meta=None):
        """Long-format (x, x', Re, Im) table of a complex matrix."""
        X, XP = np.meshgrid(x, xp, indexing="ij")
        return self.write_csv(name, ["x", "x_prime", "re", "im"],
                              [X, XP, M.real, M.imag], meta)

    def write_json(self, name, obj, kind="json"):
        path = self.root / name
        path.write_text(dumps(obj))
        self._register(path, kind)
        return path

    def write_npy(self, name, array, meta=None):
        path = self.root / name
        np.save(path, np.asarray(array), allow_pickle=False)
        self._register(path, "npy")
        if meta is not None:
            self.write_json(name + ".json", meta, kind="sidecar")
        return path
