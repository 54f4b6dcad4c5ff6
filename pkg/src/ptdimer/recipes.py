"""Parameter panels behind the sublattice-intensity heatmaps.

``fig2``: one lattice (N=41, nu'/nu=1, gamma/nu=0.5), start on the central gain site.
``fig3``: nu'/nu in {0, 0.5, 1, 1.5, 2} x gamma/nu in {0, 0.5, 1}, gain-site start.
``fig4``: the same panel with a loss-site start.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .asymptotics import modality
from .errors import InvalidParameters, PTDimerError
from .export import export_trajectory, write_csv, write_manifest
from .lattice import Boundary, LatticeParams, spectrum
from .propagation import GAIN_SITE, LOSS_SITE, evolve
from .transitions import absorbed_distribution, phase_classify_grid, rule_phase

PANEL_RATIOS = (0.0, 0.5, 1.0, 1.5, 2.0)
PANEL_GAMMAS = (0.0, 0.5, 1.0)


@dataclass
class RecipeResult:
    name: str
    directory: Path
    files: list
    grid: object = None
    failures: int = 0


def cell_name(ratio: float, gamma: float) -> str:
    return f"nup{ratio:g}_gamma{gamma:g}"


def _panel_row(out, ratio, gamma, init, grid, i, j, n_dimers, t_max, n_times):
    params = LatticeParams(n_dimers, 1.0, ratio, gamma)
    traj = evolve(params, init, t_max, n_times - 1)
    files = export_trajectory(traj, out / cell_name(ratio, gamma), manifest=False)
    final = -1
    peaks = [modality(traj.intensity_g[:, final]).n_peaks, modality(traj.intensity_l[:, final]).n_peaks]
    dm = math.nan
    if gamma > 0:
        dm = absorbed_distribution(params, init, strict=False).delta_m_pt
    row = [
        cell_name(ratio, gamma),
        ratio,
        gamma,
        grid.phase[i, j].value,
        spectrum(params).phase.value,
        "true" if grid.on_boundary[i, j] else "false",
        grid.gamma_pt_finite[i, j],
        rule_phase(ratio, gamma, grid.gamma_pt_finite[i, j]).value,
        dm,
        peaks[0],
        peaks[1],
        float(max(traj.log10_intensity("G").max(), traj.log10_intensity("L").max())),
        math.nan if traj.edge_contact_time is None else traj.edge_contact_time,
        "",
    ]
    return files, row


PANEL_HEADER = [
    "cell",
    "nu_prime_over_nu",
    "gamma_over_nu",
    "phase",
    "phase_open",
    "on_boundary",
    "gamma_pt_finite",
    "rule_phase",
    "delta_m_pt",
    "n_peaks_g",
    "n_peaks_l",
    "max_log10_intensity",
    "edge_contact_time",
    "error",
]


def run_figure_recipe(
    name: str,
    out_dir,
    *,
    jobs: int = 1,
    n_dimers: int = 41,
    t_max: float = 10.0,
    n_times: int = 501,
    config=None,
) -> RecipeResult:
    """Run every cell of a figure panel and export one heatmap pair per cell.

    Cells that fail are recorded in ``panel_index.csv`` and the run continues.
    """
    out = Path(out_dir) / name
    if name == "fig2":
        params = LatticeParams(n_dimers, 1.0, 1.0, 0.5)
        traj = evolve(params, GAIN_SITE, t_max, n_times - 1)
        files = export_trajectory(traj, out, manifest=False)
        files.append(write_manifest(out, files, config))
        return RecipeResult(name, out, files)
    if name not in ("fig3", "fig4"):
        raise InvalidParameters(f"unknown recipe {name!r}")

    init = GAIN_SITE if name == "fig3" else LOSS_SITE
    grid = phase_classify_grid(PANEL_RATIOS, PANEL_GAMMAS, n_dimers, boundary=Boundary.PERIODIC, jobs=jobs)
    cells = list(grid.cells())

    def work(cell):
        i, j, r, g = cell
        try:
            return _panel_row(out, r, g, init, grid, i, j, n_dimers, t_max, n_times)
        except PTDimerError as exc:
            row = [cell_name(r, g), r, g] + [""] * (len(PANEL_HEADER) - 4) + [str(exc).replace(",", ";")]
            return [], row

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(work, cells))
    files, rows = [], []
    failures = 0
    for cell_files, row in results:
        files.extend(cell_files)
        rows.append(row)
        failures += bool(row[-1])
    files.append(write_csv(out / "panel_index.csv", PANEL_HEADER, rows))
    files.append(write_manifest(out, files, config))
    return RecipeResult(name, out, files, grid, failures)


def heatmap_files(result: RecipeResult) -> list:
    return sorted(p for p in map(Path, result.files) if p.name in ("intensity_g.csv", "intensity_l.csv"))
