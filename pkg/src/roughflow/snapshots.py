"""Field snapshot files and trajectory directories.

A snapshot is one line of JSON followed by the raw little-endian float64
payload, node-major with the component index varying fastest.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import Field, Grid

MONITOR_COLUMNS = ("step", "t", "Linf", "L2", "mean", "energy_residual", "cfl")


def field_header(f: Field) -> dict:
    return {
        "d": f.grid.d,
        "N": f.grid.N,
        "m": f.m,
        "dtype": "f64",
        "order": "node-major-C",
        "endianness": "little",
    }


def write_field(path, f: Field, extra: dict | None = None) -> Path:
    path = Path(path)
    header = field_header(f)
    if extra:
        header.update(extra)
    payload = np.ascontiguousarray(np.moveaxis(f.values, 0, -1), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(payload.tobytes())
    return path


def read_field(path) -> tuple[Field, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    if header.get("dtype") != "f64" or header.get("endianness") != "little":
        raise ValueError(f"{path}: unsupported snapshot encoding")
    if header.get("order") != "node-major-C":
        raise ValueError(f"{path}: unsupported value order {header.get('order')!r}")
    grid = Grid(int(header["d"]), int(header["N"]))
    m = int(header["m"])
    expected = grid.size * m * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: payload has {len(raw)} bytes, expected {expected}")
    vals = np.frombuffer(raw, dtype="<f8").reshape(grid.shape + (m,))
    return Field(grid, np.moveaxis(vals, -1, 0)), header


def write_csv(path, columns: dict[str, np.ndarray], order=None) -> Path:
    """Deterministic CSV: fixed column order, floats as %.17g."""
    path = Path(path)
    names = list(order or columns)
    n = len(next(iter(columns.values()))) if columns else 0
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(names)
        for i in range(n):
            out.writerow([_fmt(columns[c][i]) for c in names])
    return path


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names, body = rows[0], rows[1:]
    return {c: np.array([float(r[i]) for r in body]) for i, c in enumerate(names)}


def save_trajectory(traj, directory) -> list[Path]:
    """Write one snapshot per stored time plus ``monitors.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for i, (t, f) in enumerate(zip(traj.times, traj.fields)):
        written.append(write_field(directory / f"snap_{i:05d}.bin", f, {"t": float(t)}))
    extra = [c for c in traj.monitors if c not in MONITOR_COLUMNS]
    written.append(write_csv(directory / "monitors.csv", traj.monitors, list(MONITOR_COLUMNS) + extra))
    return written


def load_trajectory(directory):
    from .solvers import Trajectory

    directory = Path(directory)
    fields, times = [], []
    for p in sorted(directory.glob("snap_*.bin")):
        f, header = read_field(p)
        fields.append(f)
        times.append(header["t"])
    if not fields:
        raise ValueError(f"no snapshots in {directory}")
    monitors = read_csv(directory / "monitors.csv")
    monitors["step"] = monitors["step"].astype(int)
    dt = float(monitors["t"][1] - monitors["t"][0]) if len(monitors["t"]) > 1 else 0.0
    return Trajectory(fields[0].grid, dt, np.asarray(times), fields, monitors)
