"""Schema-checked readers for the gvf CLI's CSV and JSON output files.

This package deliberately never imports the gvf library: the file formats
are the contract.  Extra columns are ignored; missing required columns are
errors.
"""

from __future__ import annotations

import json

import numpy as np

__all__ = [
    "SchemaError",
    "load_components",
    "load_field",
    "load_path",
    "load_singular",
    "load_trajectory",
    "read_table",
]


class SchemaError(ValueError):
    """An input file does not match the documented schema."""


def read_table(path: str) -> tuple[list[str], np.ndarray]:
    """Read a comma separated table with a header row into float columns."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise SchemaError(f"{path}: no data rows")
    header = lines[0].split(",")
    try:
        rows = np.array(
            [[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric cell ({exc})") from None
    if rows.shape[1] != len(header):
        raise SchemaError(
            f"{path}: header has {len(header)} columns, rows have {rows.shape[1]}"
        )
    return header, rows


def _column(path: str, header: list[str], rows: np.ndarray, name: str) -> np.ndarray:
    try:
        return rows[:, header.index(name)]
    except ValueError:
        raise SchemaError(f"{path}: missing required column {name!r}") from None


def _prefixed(path: str, header: list[str], rows: np.ndarray, prefix: str) -> np.ndarray:
    """Columns prefix_0 .. prefix_{m-1}, required contiguous from 0."""
    m = 0
    while f"{prefix}{m}" in header:
        m += 1
    if m == 0:
        raise SchemaError(f"{path}: missing required columns {prefix}0, ...")
    idx = [header.index(f"{prefix}{j}") for j in range(m)]
    return rows[:, idx]


def load_trajectory(path: str) -> dict:
    """t,x_0..x_{m-1},e_norm,V,chi_norm,residual -> dict of arrays."""
    header, rows = read_table(path)
    out = {
        "t": _column(path, header, rows, "t"),
        "X": _prefixed(path, header, rows, "x_"),
        "e_norm": _column(path, header, rows, "e_norm"),
        "V": _column(path, header, rows, "V"),
        "chi_norm": _column(path, header, rows, "chi_norm"),
        "residual": _column(path, header, rows, "residual"),
    }
    return out


def load_field(path: str) -> dict:
    """x_0..,chi_0..,e_norm,V -> dict of arrays."""
    header, rows = read_table(path)
    X = _prefixed(path, header, rows, "x_")
    chi = _prefixed(path, header, rows, "chi_")
    if chi.shape[1] != X.shape[1]:
        raise SchemaError(
            f"{path}: {X.shape[1]} coordinate columns but {chi.shape[1]} field columns"
        )
    return {
        "X": X,
        "chi": chi,
        "e_norm": _column(path, header, rows, "e_norm"),
        "V": _column(path, header, rows, "V"),
    }


def load_path(path: str) -> np.ndarray:
    """x_0..x_{m-1} sample polyline."""
    header, rows = read_table(path)
    return _prefixed(path, header, rows, "x_")


def load_components(path: str) -> dict:
    """t,abs_phi_0..abs_phi_{p-1}."""
    header, rows = read_table(path)
    return {
        "t": _column(path, header, rows, "t"),
        "abs_phi": _prefixed(path, header, rows, "abs_phi_"),
    }


def load_singular(path: str) -> list[dict]:
    """singular.json (a list) or check.json (a dict holding one)."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(data, dict) and "singular" in data:
        data = data["singular"]
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a list of singular-point records")
    points = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or "x" not in entry or "label" not in entry:
            raise SchemaError(f"{path}: record #{i} lacks 'x'/'label'")
        points.append(
            {
                "x": np.asarray(entry["x"], dtype=float),
                "label": str(entry["label"]),
            }
        )
    return points
