"""Command-line entry point.

    ptdimer <command> --config <path> [--jobs N] [--out DIR] [--seed S]

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 partial sweep.
``PTDIMER_OUT`` overrides ``--out``.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .asymptotics import analytic_wavefunctions, compare_profiles, comparison_window, modality
from .config import COMMANDS, RunConfig, parse_config
from .errors import ConfigError, PTDimerError
from .export import export_trajectory, write_csv, write_json, write_manifest
from .lattice import Boundary, pt_threshold, spectrum, winding_number
from .propagation import evolve
from .recipes import run_figure_recipe
from .transitions import (
    absorbed_distribution,
    disorder_robustness,
    phase_classify_grid,
    rule_phase,
    transition_curve,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4

log = logging.getLogger("ptdimer")


def _spectrum(cfg: RunConfig, out: Path, jobs: int):
    params = cfg.lattice
    rep = spectrum(params)
    thr = pt_threshold(params)
    try:
        winding = winding_number(params.nu, params.nu_prime)
    except PTDimerError:
        winding = None
    files = [
        write_csv(out / "spectrum.csv", ["re", "im"], ((e.real, e.imag) for e in rep.eigenvalues)),
        write_json(
            out / "spectrum.json",
            {
                "phase": rep.phase.value,
                "max_imag": rep.max_imag,
                "condition": rep.condition,
                "gamma_pt_infinite": thr.gamma_pt_infinite,
                "gamma_pt_finite": thr.gamma_pt_finite,
                "winding": winding,
            },
        ),
    ]
    return files, 0


def _evolve(cfg: RunConfig, out: Path, jobs: int):
    traj = evolve(cfg.lattice, cfg.initial, cfg.t_max, cfg.n_times - 1)
    return export_trajectory(traj, out, manifest=False), 0


def _meandisp(cfg: RunConfig, out: Path, jobs: int):
    rep = absorbed_distribution(cfg.lattice, cfg.initial, cfg.quadrature, strict=False)
    summary = {
        "delta_m_pt": rep.delta_m_pt,
        "quad_error": rep.quad_error,
        "residual": rep.residual,
        "winding": rep.winding,
        "phase": rep.phase.value,
        "t_max": rep.t_max,
        "converged": rep.converged,
    }
    files = [write_csv(out / "absorbed.csv", ["m", "P"], zip(rep.dimers, rep.absorbed))]
    if cfg.disorder_strength is not None:
        stats = disorder_robustness(
            cfg.lattice, cfg.initial, cfg.disorder_strength, cfg.n_realizations, cfg.seed, cfg.quadrature, jobs
        )
        summary["disorder"] = {"mean": stats.mean, "std": stats.std, "failures": stats.failures}
        files.append(write_csv(out / "disorder.csv", ["realization", "delta_m_pt"], enumerate(stats.values)))
    files.append(write_json(out / "meandisp.json", summary))
    if not rep.converged:
        log.warning("absorption did not converge: residual %.3e", rep.residual)
        return files, 1
    return files, 0


def _sweep(cfg: RunConfig, out: Path, jobs: int):
    nu = cfg.normalized["nu"]
    points = transition_curve(
        nu,
        cfg.normalized["gamma"],
        cfg.initial,
        [r * nu for r in cfg.nu_prime_list],
        cfg.normalized["n_dimers"],
        cfg.quadrature,
        Boundary(cfg.normalized["boundary"]),
        jobs,
    )
    rows = [
        (p.nu_prime_over_nu, p.delta_m_pt, str(p.converged).lower(), str(p.near_degenerate).lower(), p.error or "")
        for p in points
    ]
    header = ["nu_prime_over_nu", "delta_m_pt", "converged", "near_degenerate", "error"]
    failed = sum(p.error is not None for p in points)
    return [write_csv(out / "transition_curve.csv", header, rows)], failed


def _asymptotics(cfg: RunConfig, out: Path, jobs: int):
    params = cfg.lattice
    init = "G" if math.isclose(cfg.initial.theta, 0.0, abs_tol=1e-12) else "L"
    traj = evolve(params, cfg.initial, cfg.t_max, cfg.n_times - 1)
    m = params.dimers()
    psi_g, psi_l = analytic_wavefunctions(params.nu, params.nu_prime, params.gamma, init, m, cfg.t_max)
    a_g, a_l = np.abs(psi_g) ** 2, np.abs(psi_l) ** 2
    n_g, n_l = traj.intensity_g[:, -1], traj.intensity_l[:, -1]
    window = comparison_window(params.nu, params.nu_prime, params.gamma, cfg.t_max)
    summary = {
        "init_sublattice": init,
        "t": cfg.t_max,
        "window": window,
        "error_g": compare_profiles(n_g, a_g, m, window),
        "error_l": compare_profiles(n_l, a_l, m, window),
        "n_peaks_numeric_g": modality(n_g, m).n_peaks,
        "n_peaks_numeric_l": modality(n_l, m).n_peaks,
        "n_peaks_analytic_g": modality(a_g, m).n_peaks,
        "n_peaks_analytic_l": modality(a_l, m).n_peaks,
        "edge_contact_time": traj.edge_contact_time,
    }
    header = ["m", "numeric_g", "numeric_l", "analytic_g", "analytic_l"]
    files = [
        write_csv(out / "profiles.csv", header, zip(m, n_g / n_g.sum(), n_l / n_l.sum(), a_g / a_g.sum(), a_l / a_l.sum())),
        write_json(out / "comparison.json", summary),
    ]
    return files, 0


def _phase_diagram(cfg: RunConfig, out: Path, jobs: int):
    if cfg.recipe is not None:
        res = run_figure_recipe(cfg.recipe, out, jobs=jobs, n_dimers=cfg.normalized["n_dimers"],
                                t_max=cfg.t_max, n_times=cfg.n_times, config=cfg)
        return res.files, res.failures
    if not cfg.nu_prime_list or not cfg.gamma_list:
        raise ConfigError("phase-diagram needs 'recipe' or both 'nu_prime_list' and 'gamma_list'", "recipe")
    grid = phase_classify_grid(
        cfg.nu_prime_list,
        cfg.gamma_list,
        cfg.normalized["n_dimers"],
        boundary=Boundary.PERIODIC,
        jobs=jobs,
    )
    rows = []
    for i, j, r, g in grid.cells():
        phase = grid.phase[i, j]
        rows.append((
            r,
            g,
            "failed" if phase is None else phase.value,
            str(bool(grid.on_boundary[i, j])).lower(),
            grid.gamma_pt_finite[i, j],
            rule_phase(r, g, grid.gamma_pt_finite[i, j]).value,
            grid.max_imag[i, j],
        ))
    header = ["nu_prime_over_nu", "gamma_over_nu", "phase", "on_boundary", "gamma_pt_finite", "rule_phase", "max_imag"]
    return [write_csv(out / "phase_grid.csv", header, rows)], int(grid.failed.sum())


HANDLERS = {
    "spectrum": _spectrum,
    "evolve": _evolve,
    "meandisp": _meandisp,
    "sweep": _sweep,
    "asymptotics-compare": _asymptotics,
    "phase-diagram": _phase_diagram,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ptdimer", description="PT-symmetric dimer lattice simulations")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--jobs", type=int, default=1, help="concurrent sweep cells")
    p.add_argument("--out", default=None, help="output directory (PTDIMER_OUT wins)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = Path(args.config).read_bytes()
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, command=args.command, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(os.environ.get("PTDIMER_OUT") or args.out or cfg.out or "ptdimer_out")
    start = time.perf_counter()
    try:
        files, failed = HANDLERS[cfg.command](cfg, out, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PTDimerError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_NUMERIC
    if not any(Path(f).name == "manifest.json" and Path(f).parent == out for f in files):
        write_manifest(out, files, cfg, time.perf_counter() - start)
    log.info("wrote %d files to %s", len(files) + 1, out)
    if failed:
        return EXIT_PARTIAL if cfg.command in ("sweep", "phase-diagram") else EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
