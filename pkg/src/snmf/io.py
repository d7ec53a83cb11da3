"""Dataset CSV files, JSON model files and JSON run reports.

Datasets are one sample per row with a header ``f0,f1,...`` and an optional
final ``label`` column.  Models and reports are JSON documents carrying a
``schema`` field; floats are written with Python's shortest round-trip
repr, so reading a file back reproduces every value exactly.  All writes go
to a temporary file in the target directory that is renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DatasetError, DimensionMismatch, IoError
from .supervised import LogRegModel

MODEL_SCHEMA = "snmf-model/1"
REPORT_SCHEMA = "snmf-report/1"
LABEL_COLUMN = "label"


@dataclass
class Dataset:
    X: np.ndarray
    y: Optional[np.ndarray] = None
    path: str = ""

    def require_labels(self) -> np.ndarray:
        if self.y is None:
            raise DatasetError(f"{self.path}: no '{LABEL_COLUMN}' column")
        return self.y


def atomic_write(path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read_text(path) -> str:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


# CSV datasets

def read_dataset(path) -> Dataset:
    """Load a dataset, checking every feature is finite and >= 0.

    The first offending cell is reported by 1-based data row and column name.
    """
    text = _read_text(path)
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    has_label = header[-1] == LABEL_COLUMN
    n_features = len(header) - int(has_label)
    if n_features < 1:
        raise DatasetError(f"{path}: no feature columns")
    body = rows[1:]
    if not body:
        raise DatasetError(f"{path}: no data rows")

    X = np.empty((len(body), n_features))
    y = np.empty(len(body), dtype=np.int64) if has_label else None
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {i} has {len(row)} fields, header has {len(header)}")
        for j in range(n_features):
            try:
                v = float(row[j])
            except ValueError:
                raise DatasetError(f"{path}: row {i}, column {header[j]}: not a number: {row[j]!r}") from None
            if not math.isfinite(v) or v < 0:
                raise DatasetError(f"{path}: row {i}, column {header[j]}: value {row[j]} is not finite and >= 0")
            X[i - 1, j] = v
        if has_label:
            lab = row[-1].strip()
            if lab not in ("0", "1"):
                raise DatasetError(f"{path}: row {i}: label {lab!r} is not 0 or 1")
            y[i - 1] = int(lab)
    return Dataset(X, y, str(path))


def format_matrix(M: np.ndarray, prefix: str = "f", labels=None) -> str:
    M = np.asarray(M, dtype=np.float64)
    header = [f"{prefix}{j}" for j in range(M.shape[1])]
    if labels is not None:
        header.append(LABEL_COLUMN)
    lines = [",".join(header)]
    for i, row in enumerate(M.tolist()):
        cells = [repr(v) for v in row]
        if labels is not None:
            cells.append(str(int(labels[i])))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_dataset(path, X, y=None) -> None:
    atomic_write(path, format_matrix(X, "f", y))


# JSON documents

def _clean(obj):
    """Recursively convert numpy values to JSON-native types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, doc: dict) -> None:
    atomic_write(path, dumps(doc))


def read_json(path) -> dict:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise IoError(f"{path}: not valid JSON: {exc}") from exc


# models

@dataclass
class ModelFile:
    """Everything needed to score new samples: basis, classifiers and settings."""

    mode: str
    U: np.ndarray
    V: np.ndarray
    classifier: Optional[LogRegModel]
    joint: Optional[LogRegModel]
    hyper: dict
    settings: dict

    @property
    def n_features(self) -> int:
        return self.V.shape[1]

    def check_features(self, X: np.ndarray, path: str = "") -> None:
        if X.shape[1] != self.n_features:
            where = f"{path}: " if path else ""
            raise DimensionMismatch(
                f"{where}data has {X.shape[1]} features but the model expects {self.n_features}")


def _logreg_doc(m: Optional[LogRegModel]):
    return None if m is None else {"w": m.w, "b": m.b}


def _logreg_from(doc) -> Optional[LogRegModel]:
    return None if doc is None else LogRegModel(np.asarray(doc["w"], dtype=np.float64), float(doc["b"]))


def model_to_doc(model: ModelFile) -> dict:
    return {
        "schema": MODEL_SCHEMA,
        "mode": model.mode,
        "U": model.U,
        "V": model.V,
        "classifier": _logreg_doc(model.classifier),
        "joint": _logreg_doc(model.joint),
        "hyper": model.hyper,
        "settings": model.settings,
    }


def save_model(path, model: ModelFile) -> None:
    write_json(path, model_to_doc(model))


def load_model(path) -> ModelFile:
    doc = read_json(path)
    if doc.get("schema") != MODEL_SCHEMA:
        raise IoError(f"{path}: expected schema {MODEL_SCHEMA!r}, found {doc.get('schema')!r}")
    try:
        V = np.asarray(doc["V"], dtype=np.float64).reshape(len(doc["V"]), -1)
        U = np.asarray(doc["U"], dtype=np.float64).reshape(-1, V.shape[0])
        return ModelFile(doc["mode"], U, V, _logreg_from(doc["classifier"]),
                         _logreg_from(doc["joint"]), doc["hyper"], doc["settings"])
    except (KeyError, TypeError, ValueError) as exc:
        raise IoError(f"{path}: malformed model file: {exc}") from exc
