"""Plot-ready CSV files and the JSON run manifest."""
import os
from typing import Dict, List, Sequence, Tuple

import numpy as np

from logger import setup_logger
from qfode.pde_models import GridField, Mesh2D

logger = setup_logger(__name__)

FLOAT_FORMAT = "%.17g"


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_csv(path: str, columns: Sequence[str], rows) -> str:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(columns):
        raise ValueError(f"{len(columns)} columns declared, rows have {rows.shape[1]}")
    ensure_dir(os.path.dirname(path) or ".")
    np.savetxt(path, rows, delimiter=",", header=",".join(columns), comments="",
               fmt=FLOAT_FORMAT, encoding="utf-8")
    logger.debug(f"Wrote {rows.shape[0]} row(s) to {path}")
    return path


def read_csv(path: str) -> Tuple[List[str], np.ndarray]:
    with open(path, encoding="utf-8") as f:
        columns = f.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, encoding="utf-8")
    return columns, data


def append_csv_row(path: str, columns: Sequence[str], row: Sequence[float]) -> str:
    if not os.path.exists(path):
        return write_csv(path, columns, [row])
    existing_columns, _ = read_csv(path)
    if existing_columns != list(columns):
        raise ValueError(f"{path} has columns {existing_columns}, expected {list(columns)}")
    with open(path, "a", encoding="utf-8") as f:
        np.savetxt(f, np.atleast_2d(np.asarray(row, dtype=float)), delimiter=",",
                   fmt=FLOAT_FORMAT)
    return path


def write_field(path: str, field: GridField) -> str:
    """x, y and one column per component, one row per mesh node."""
    x, y = field.mesh.coordinates()
    rows = np.column_stack([x.reshape(-1), y.reshape(-1)] + list(field.values))
    return write_csv(path, ("x", "y") + field.components, rows)


def line_index(coordinates: np.ndarray, position: float) -> int:
    return int(np.argmin(np.abs(coordinates - position)))


def extract_line(values: np.ndarray, mesh: Mesh2D, axis: str,
                 position: float) -> Tuple[np.ndarray, np.ndarray]:
    """Values on the mesh line nearest to x = position (axis 'x') or y = position."""
    if axis == "x":
        return mesh.y, values[:, line_index(mesh.x, position)]
    if axis == "y":
        return mesh.x, values[line_index(mesh.y, position), :]
    raise ValueError(f"Line axis must be 'x' or 'y', got {axis!r}")


def write_profile(path: str, coordinate: np.ndarray, value: np.ndarray,
                  comparison: np.ndarray) -> str:
    return write_csv(path, ("coordinate", "value", "exact_or_reference"),
                     np.column_stack([coordinate, value, comparison]))


def parse_lines(text: str) -> List[Tuple[str, float]]:
    """'x=0.5,y=0.5' -> [('x', 0.5), ('y', 0.5)]"""
    lines = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        axis, _, position = item.partition("=")
        if axis not in ("x", "y") or not position:
            raise ValueError(f"Bad profile line {item!r}, expected x=<v> or y=<v>")
        lines.append((axis, float(position)))
    return lines


def profile_name(component: str, axis: str, position: float) -> str:
    return f"profile_{component}_{axis}{position:g}.csv"


def profiles_for(mesh: Mesh2D, components: Dict[str, Tuple[np.ndarray, np.ndarray]],
                 lines: Sequence[Tuple[str, float]], out_dir: str) -> List[str]:
    """Write one profile file per (component, line); components map name -> (value, comparison)."""
    paths = []
    for name, (value, comparison) in components.items():
        for axis, position in lines:
            coordinate, line = extract_line(value, mesh, axis, position)
            _, other = extract_line(comparison, mesh, axis, position)
            paths.append(write_profile(os.path.join(out_dir, profile_name(name, axis, position)),
                                       coordinate, line, other))
    return paths
