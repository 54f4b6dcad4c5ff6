"""Deterministic CSV/JSON writers and the run manifest.

Numbers are written with 17 significant digits (``%.17g``), which round-trips
every float64 exactly; files use LF line endings.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .propagation import Trajectory

LOG10_FLOOR = -16.0


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return path


def clamped_log10(traj: Trajectory, sub) -> np.ndarray:
    return np.maximum(traj.log10_intensity(sub), LOG10_FLOOR)


def write_heatmap(path, times, dimers, values) -> Path:
    """One row per dimer (ascending), one column per time."""
    header = ["m"] + [fmt(t) for t in times]
    rows = ([str(int(m))] + [fmt(v) for v in row] for m, row in zip(dimers, values))
    return write_csv(path, header, rows)


def read_heatmap(path):
    """Inverse of :func:`write_heatmap`: ``(dimers, times, log10 values)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        body = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    times = np.array([float(t) for t in header[1:]])
    dimers = np.array([int(r[0]) for r in body])
    values = np.array([[float(v) for v in r[1:]] for r in body])
    return dimers, times, values


def export_trajectory(traj: Trajectory, directory, *, manifest: bool = True, config=None) -> list:
    """Write ``intensity_g.csv``, ``intensity_l.csv``, ``total_intensity.csv``.

    Heatmap values are ``log10`` intensities clamped below at -16. Returns the
    written paths; with ``manifest`` a ``manifest.json`` listing them is added.
    """
    start = time.perf_counter()
    directory = Path(directory)
    m = np.arange(traj.n_dimers) - traj.n_dimers // 2
    files = [
        write_heatmap(directory / "intensity_g.csv", traj.times, m, clamped_log10(traj, "G")),
        write_heatmap(directory / "intensity_l.csv", traj.times, m, clamped_log10(traj, "L")),
        write_csv(directory / "total_intensity.csv", ["t", "I"], zip(traj.times, traj.total)),
    ]
    if manifest:
        files.append(write_manifest(directory, files, config, time.perf_counter() - start))
    return files


@dataclass
class OutputManifest:
    config_hash: str | None
    code_version: str
    files: list
    wall_time_s: float
    backend: str = field(default_factory=lambda: kernels.BACKEND)

    def as_dict(self):
        return {
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "backend": self.backend,
            "files": self.files,
            "wall_time_s": self.wall_time_s,
        }


def write_manifest(directory, files, config=None, wall_time: float = 0.0) -> Path:
    """``manifest.json`` listing every file (relative paths, sorted), itself included."""
    directory = Path(directory)
    path = directory / "manifest.json"
    names = {Path(f).resolve().relative_to(directory.resolve()).as_posix() for f in files}
    names.add("manifest.json")
    digest = config.config_hash if config is not None else None
    manifest = OutputManifest(digest, __version__, sorted(names), round(wall_time, 6))
    return write_json(path, manifest.as_dict())
