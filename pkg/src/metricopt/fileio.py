"""CSV readers and writers for labels, probabilities, and features.

Label files carry a ``y1..yM`` header and integer classes 1..K.  Probability
files start with a ``# M=...,K=...`` metadata line followed by ``p_m_k``
columns in output-major order.  Feature files carry an ``x1..xD`` header.
Floats are written with shortest round-trip repr so files reproduce exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .confusion import LabelMatrix, PredictionMatrix, ProbabilityField


def _open_rows(path: str | Path) -> list[list[str]]:
    path = Path(path)
    if not path.exists():
        raise ValueError(f"missing file: {path}")
    with open(path, newline="") as handle:
        return [row for row in csv.reader(handle)]


def _parse_int(cell: str, path, line: int) -> int:
    try:
        return int(cell)
    except ValueError:
        raise ValueError(f"{path}:{line}: expected an integer class, got {cell!r}") from None


def _parse_float(cell: str, path, line: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ValueError(f"{path}:{line}: expected a number, got {cell!r}") from None


def read_labels(path: str | Path, n_classes: int | None = None) -> LabelMatrix:
    """Read a label (or prediction) matrix; K defaults to the largest class seen."""
    rows = _open_rows(path)
    if not rows:
        raise ValueError(f"{path}:1: empty file")
    header = rows[0]
    n_outputs = len(header)
    if n_outputs == 0 or not all(col.strip() for col in header):
        raise ValueError(f"{path}:1: malformed header {header!r}")
    values = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != n_outputs:
            raise ValueError(
                f"{path}:{line_no}: expected {n_outputs} columns, got {len(row)}"
            )
        values.append([_parse_int(cell, path, line_no) for cell in row])
    if not values:
        raise ValueError(f"{path}: no data rows")
    array = np.asarray(values, dtype=np.int64)
    return LabelMatrix(array, n_classes=int(array.max()) if n_classes is None else n_classes)


def write_predictions(path: str | Path, preds: PredictionMatrix | LabelMatrix) -> None:
    with open(path, "w", newline="\n") as handle:
        handle.write(",".join(f"y{m + 1}" for m in range(preds.n_outputs)) + "\n")
        for row in preds.values:
            handle.write(",".join(str(int(v)) for v in row) + "\n")


def read_probs(path: str | Path) -> ProbabilityField:
    """Read a probability field; the metadata line fixes M and K."""
    path = Path(path)
    if not path.exists():
        raise ValueError(f"missing file: {path}")
    with open(path) as handle:
        lines = handle.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f'{path}:1: expected metadata line "# M=...,K=..."')
    meta = {}
    for part in lines[0].lstrip("#").split(","):
        key, _, value = part.strip().partition("=")
        meta[key] = value
    try:
        m_out, k = int(meta["M"]), int(meta["K"])
    except (KeyError, ValueError):
        raise ValueError(f"{path}:1: malformed metadata {lines[0]!r}") from None
    expected_header = [f"p_{m + 1}_{c + 1}" for m in range(m_out) for c in range(k)]
    if len(lines) < 2 or [c.strip() for c in lines[1].split(",")] != expected_header:
        raise ValueError(f"{path}:2: header must be {','.join(expected_header)}")
    values = []
    for line_no, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != m_out * k:
            raise ValueError(f"{path}:{line_no}: expected {m_out * k} columns, got {len(cells)}")
        values.append([_parse_float(cell, path, line_no) for cell in cells])
    if not values:
        raise ValueError(f"{path}: no data rows")
    array = np.asarray(values, dtype=float).reshape(len(values), m_out, k)
    return ProbabilityField(array)


def write_probs(path: str | Path, probs: ProbabilityField) -> None:
    n, m_out, k = probs.values.shape
    with open(path, "w", newline="\n") as handle:
        handle.write(f"# M={m_out},K={k}\n")
        handle.write(",".join(f"p_{m + 1}_{c + 1}" for m in range(m_out) for c in range(k)) + "\n")
        flat = probs.values.reshape(n, m_out * k)
        for row in flat:
            handle.write(",".join(repr(float(v)) for v in row) + "\n")


def read_features(path: str | Path) -> np.ndarray:
    rows = _open_rows(path)
    if not rows:
        raise ValueError(f"{path}:1: empty file")
    n_features = len(rows[0])
    values = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != n_features:
            raise ValueError(f"{path}:{line_no}: expected {n_features} columns, got {len(row)}")
        values.append([_parse_float(cell, path, line_no) for cell in row])
    if not values:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(values, dtype=float)


def write_features(path: str | Path, features: np.ndarray) -> None:
    features = np.asarray(features, dtype=float)
    with open(path, "w", newline="\n") as handle:
        handle.write(",".join(f"x{d + 1}" for d in range(features.shape[1])) + "\n")
        for row in features:
            handle.write(",".join(repr(float(v)) for v in row) + "\n")
