"""Manifest and CSV matrix ingestion, fixture writing and atomic file output."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .edgestats import fisher_z
from .errors import InvalidArgumentError, LoadError
from .graphcore import ConnectomeDataset, EdgeIndex

SYMMETRY_TOL = 1e-8


def atomic_write(path, data) -> None:
    """Write text or bytes to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_matrix(path, n: int) -> np.ndarray:
    """Parse an n x n comma-separated matrix, checking shape, numbers and symmetry."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise LoadError(f"{path}: cannot read matrix file ({exc.strerror})") from exc
    if len(lines) != n:
        raise LoadError(f"{path}: expected {n} rows, found {len(lines)}")
    out = np.empty((n, n))
    for r, line in enumerate(lines):
        cells = line.split(",")
        if len(cells) != n:
            raise LoadError(f"{path}: row {r + 1} has {len(cells)} columns, expected {n}")
        for c, cell in enumerate(cells):
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise LoadError(f"{path}: cell ({r + 1},{c + 1}) is not numeric: {cell.strip()!r}") from None
            if not np.isfinite(out[r, c]) and r != c:
                raise LoadError(f"{path}: cell ({r + 1},{c + 1}) is not finite")
    np.fill_diagonal(out, 0.0)
    diff = np.abs(out - out.T)
    if diff.max() > SYMMETRY_TOL:
        r, c = np.unravel_index(int(np.argmax(diff)), diff.shape)
        r, c = min(r, c), max(r, c)
        raise LoadError(f"{path}: not symmetric at cell ({r + 1},{c + 1}): "
                        f"{out[r, c]!r} vs {out[c, r]!r}")
    return out


def load_manifest(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise LoadError(f"{path}: cannot read manifest ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "n" not in doc or "subjects" not in doc:
        raise LoadError(f"{path}: manifest needs 'n' and 'subjects'")
    n = doc["n"]
    if not isinstance(n, int) or n < 2:
        raise LoadError(f"{path}: 'n' must be an integer >= 2")
    names = doc.get("node_names")
    if names is not None and len(names) != n:
        raise LoadError(f"{path}: {len(names)} node names for n={n}")
    for k, row in enumerate(doc["subjects"]):
        if not {"id", "group", "path"} <= set(row):
            raise LoadError(f"{path}: subject {k + 1} needs 'id', 'group' and 'path'")
        if row["group"] not in (0, 1):
            raise LoadError(f"{path}: subject {row['id']!r} has group {row['group']!r}, expected 0 or 1")
    return doc


def load_dataset(manifest_path, apply_fisher_z: bool = False):
    """Dataset and node names (or ``None``) from a manifest and its matrices.

    Matrix paths are relative to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    doc = load_manifest(manifest_path)
    n = doc["n"]
    idx = EdgeIndex(n)
    base = manifest_path.parent
    rows, ids, labels = [], [], []
    for row in doc["subjects"]:
        mpath = base / row["path"]
        vec = idx.from_matrix(read_matrix(mpath, n))
        if apply_fisher_z:
            try:
                vec = fisher_z(vec)
            except InvalidArgumentError:
                raise LoadError(f"{mpath}: Fisher z needs all off-diagonal |r| < 1") from None
        rows.append(vec)
        ids.append(str(row["id"]))
        labels.append(row["group"])
    try:
        ds = ConnectomeDataset(n, ids, np.array(labels), np.array(rows).reshape(len(rows), -1))
    except InvalidArgumentError as exc:
        raise LoadError(f"{manifest_path}: {exc}") from exc
    return ds, doc.get("node_names")


def write_dataset(directory, dataset: ConnectomeDataset, node_names=None,
                  extra: dict | None = None) -> Path:
    """Write one CSV matrix per subject plus ``manifest.json``; returns the manifest path."""
    directory = Path(directory)
    (directory / "matrices").mkdir(parents=True, exist_ok=True)
    idx = EdgeIndex(dataset.n)
    subjects = []
    for sid, label, vec in zip(dataset.subject_ids, dataset.labels, dataset.data):
        rel = f"matrices/{sid}.csv"
        mat = idx.to_matrix(vec)
        text = "\n".join(",".join(repr(float(v)) for v in row) for row in mat) + "\n"
        atomic_write(directory / rel, text)
        subjects.append({"id": sid, "group": int(label), "path": rel})
    doc = {"n": dataset.n, "subjects": subjects}
    if node_names is not None:
        doc["node_names"] = list(node_names)
    if extra:
        doc.update(extra)
    path = directory / "manifest.json"
    atomic_write(path, json.dumps(doc, indent=2) + "\n")
    return path
