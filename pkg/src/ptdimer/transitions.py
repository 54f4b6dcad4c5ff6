"""Scaled mean displacement, absorbed distributions and phase classification.

The absorbed probability on dimer ``m`` is

    P(m) = int_0^inf 4 gamma exp(-2 gamma t) I_L^PT(m, t) dt
         = int_0^inf 4 gamma I_L^lossy(m, t) dt,

the two forms being equal because the PT and lossy Hamiltonians differ by
``i gamma`` times the identity. The lossy form is integrated by default since
its amplitudes only decay. ``delta_m_pt = sum_m m P(m)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateWinding, GammaZero, InvalidParameters, NonConvergent, PTDimerError
from .lattice import (
    Boundary,
    LatticeParams,
    Model,
    PhaseLabel,
    build_hamiltonian,
    pt_threshold,
    spectrum,
    winding_number,
)
from .propagation import GAIN_SITE, InitialSpec, initial_state, propagator

LINE_TOL = 1e-9


@dataclass(frozen=True)
class QuadratureSettings:
    """Horizon, step count and residual cutoff for the absorption integral.

    ``None`` horizons start at ``20/gamma``; ``None`` step counts give
    ``gamma * dt = 0.01``.
    """

    t_max: float | None = None
    n_steps: int | None = None
    tail_tol: float = 1e-6
    max_doublings: int = 6

    def __post_init__(self):
        if self.t_max is not None and not self.t_max > 0:
            raise InvalidParameters(f"t_max must be > 0, got {self.t_max}")
        if self.n_steps is not None and self.n_steps < 1:
            raise InvalidParameters(f"n_steps must be >= 1, got {self.n_steps}")
        if not 0 < self.tail_tol < 1:
            raise InvalidParameters(f"tail_tol must lie in (0, 1), got {self.tail_tol}")
        if self.max_doublings < 0:
            raise InvalidParameters("max_doublings must be >= 0")


@dataclass(frozen=True)
class TransitionReport:
    delta_m_pt: float
    quad_error: float
    absorbed: np.ndarray = field(repr=False)
    residual: float
    winding: int | None
    phase: PhaseLabel
    t_max: float
    converged: bool
    dimers: np.ndarray = field(repr=False)

    @property
    def winding_degenerate(self) -> bool:
        return self.winding is None


def _integrate_absorption(h, psi0, gamma, q, frame):
    """Composite trapezoid with Euler-Maclaurin endpoint correction.

    Returns ``(absorbed, residual, t_max, converged, correction)`` where
    ``correction`` is the per-dimer endpoint term, i.e. the leading error of
    the uncorrected trapezoid sum.
    """
    n_sites = h.shape[0]
    t_max = q.t_max if q.t_max is not None else 20.0 / gamma
    n_steps = q.n_steps if q.n_steps is not None else max(1, math.ceil(gamma * t_max / 0.01))
    dt = t_max / n_steps
    if frame == "lossy":
        h_frame = h - 1j * gamma * np.eye(n_sites)
        drift = 0.0
    elif frame == "pt":
        h_frame = h
        drift = -gamma
    else:
        raise InvalidParameters(f"unknown frame {frame!r}")
    step = np.ascontiguousarray(propagator(h_frame, dt))
    a = -1j * h_frame

    def loss_and_slope(u, log_amp):
        # g = |psi_L|^2 and dg/dt for psi = exp(log_amp) u
        w = math.exp(2.0 * log_amp)
        du = a @ u
        loss = u[1::2]
        g = w * (loss.real**2 + loss.imag**2)
        slope = w * (2.0 * (np.conj(loss) * du[1::2]).real + 2.0 * drift * (loss.real**2 + loss.imag**2))
        return g, slope

    s0 = np.linalg.norm(psi0)
    u = psi0 / s0
    log_amp = math.log(s0)
    g0, slope0 = loss_and_slope(u, log_amp)
    total = g0.copy()

    log_amp = kernels.absorb_steps(step, u, n_steps, log_amp, drift * dt, total)
    steps_done = n_steps
    doublings = 0
    while math.exp(2.0 * log_amp) >= q.tail_tol and doublings < q.max_doublings:
        log_amp = kernels.absorb_steps(step, u, steps_done, log_amp, drift * dt, total)
        steps_done *= 2
        doublings += 1

    g_end, slope_end = loss_and_slope(u, log_amp)
    trapezoid = dt * (total - 0.5 * g0 - 0.5 * g_end)
    correction = -(dt * dt / 12.0) * (slope_end - slope0)
    absorbed = 4.0 * gamma * (trapezoid + correction)
    residual = math.exp(2.0 * log_amp)
    return absorbed, residual, steps_done * dt, residual < q.tail_tol, 4.0 * gamma * correction


def _winding_or_none(params):
    try:
        return winding_number(params.nu, params.nu_prime)
    except DegenerateWinding:
        return None


def absorbed_distribution(
    params: LatticeParams,
    init: InitialSpec = GAIN_SITE,
    q: QuadratureSettings | None = None,
    *,
    frame: str = "lossy",
    strict: bool = True,
    h: np.ndarray | None = None,
) -> TransitionReport:
    """Absorbed distribution ``P(m)`` and scaled mean displacement.

    The horizon doubles until the residual norm drops below ``q.tail_tol``.
    ``h`` overrides the PT-symmetric Hamiltonian (used for disorder). With
    ``strict`` a non-converged run raises :class:`NonConvergent` carrying the
    partial report; otherwise the report comes back with ``converged=False``.
    """
    if params.gamma == 0:
        raise GammaZero("absorption vanishes identically at gamma = 0")
    q = q or QuadratureSettings()
    pt = params.with_(model=Model.PT_SYMMETRIC)
    if h is None:
        h = build_hamiltonian(pt)
    psi0 = initial_state(pt, init) if isinstance(init, InitialSpec) else np.asarray(init, complex)
    absorbed, residual, t_max, converged, correction = _integrate_absorption(
        h, psi0, params.gamma, q, frame
    )
    dimers = pt.dimers()
    report = TransitionReport(
        delta_m_pt=float(dimers @ absorbed),
        quad_error=float(abs(dimers @ correction)),
        absorbed=absorbed,
        residual=residual,
        winding=_winding_or_none(pt),
        phase=spectrum(pt, h).phase,
        t_max=t_max,
        converged=converged,
        dimers=dimers,
    )
    if strict and not converged:
        raise NonConvergent(
            f"residual {residual:.3e} above tail_tol {q.tail_tol:.1e} at t_max={t_max:g}",
            report,
        )
    return report


def gamma_independence_check(
    params: LatticeParams,
    init: InitialSpec,
    gammas,
    q: QuadratureSettings | None = None,
) -> float:
    """Spread ``max - min`` of ``delta_m_pt`` over the given gain/loss strengths."""
    gammas = list(gammas)
    if not gammas or any(not g > 0 for g in gammas):
        raise GammaZero("all gammas must be > 0")
    values = [absorbed_distribution(params.with_(gamma=g), init, q).delta_m_pt for g in gammas]
    return float(max(values) - min(values))


@dataclass(frozen=True)
class CurvePoint:
    nu_prime_over_nu: float
    delta_m_pt: float
    converged: bool
    near_degenerate: bool
    error: str | None = None


def transition_curve(
    nu: float,
    gamma: float,
    init: InitialSpec,
    nu_prime_list,
    n_dimers: int = 41,
    q: QuadratureSettings | None = None,
    boundary: Boundary = Boundary.OPEN,
    jobs: int = 1,
) -> list[CurvePoint]:
    """``delta_m_pt`` against ``nu'/nu``, sorted by the ratio.

    Points where the winding number is undefined (``nu' = nu``) or where the
    integral failed to converge are flagged, not dropped.
    """

    def point(nu_prime):
        try:
            params = LatticeParams(n_dimers, nu, nu_prime, gamma, boundary)
            report = absorbed_distribution(params, init, q, strict=False)
        except PTDimerError as exc:
            return CurvePoint(nu_prime / nu, math.nan, False, True, str(exc))
        return CurvePoint(
            nu_prime / nu,
            report.delta_m_pt,
            report.converged,
            report.winding_degenerate or not report.converged,
        )

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(point, sorted(nu_prime_list)))


def rule_phase(nu_prime_over_nu: float, gamma_over_nu: float, gamma_pt_finite_over_nu: float) -> PhaseLabel:
    """Phase predicted by the boundary ``gamma/nu = |1 - nu'/nu|``.

    Cells on the line fall back to the finite-lattice threshold; a spectrum at
    exactly that threshold is still real, so equality counts as symmetric.
    """
    line = abs(1.0 - nu_prime_over_nu)
    if abs(gamma_over_nu - line) <= LINE_TOL:
        broken = gamma_over_nu > gamma_pt_finite_over_nu + LINE_TOL
    else:
        broken = gamma_over_nu > line
    return PhaseLabel.PT_BROKEN if broken else PhaseLabel.PT_SYMMETRIC


@dataclass
class SweepGrid:
    """Rectangular ``(nu'/nu) x (gamma/nu)`` grid of per-cell observables.

    Array axes are ``[ratio_index, gamma_index]``. Failed cells have
    ``phase`` set to ``None`` and ``failed`` set.
    """

    nu_prime_over_nu: list
    gamma_over_nu: list
    n_dimers: int
    boundary: Boundary
    phase: np.ndarray
    on_boundary: np.ndarray
    gamma_pt_finite: np.ndarray
    max_imag: np.ndarray
    failed: np.ndarray
    observables: dict = field(default_factory=dict)

    def cells(self):
        for i, r in enumerate(self.nu_prime_over_nu):
            for j, g in enumerate(self.gamma_over_nu):
                yield i, j, r, g

    def rule_mismatches(self) -> list:
        """Cells whose spectrum label disagrees with :func:`rule_phase`."""
        bad = []
        for i, j, r, g in self.cells():
            expected = rule_phase(r, g, self.gamma_pt_finite[i, j])
            if self.phase[i, j] is not expected:
                bad.append((r, g, self.phase[i, j], expected))
        return bad


def _classify_cell(nu, ratio, gamma_ratio, n_dimers, boundary):
    params = LatticeParams(n_dimers, nu, ratio * nu, gamma_ratio * nu, boundary)
    report = spectrum(params)
    return report.phase, report.max_imag, pt_threshold(params).gamma_pt_finite / nu


def phase_classify_grid(
    nu_prime_over_nu,
    gamma_over_nu,
    n_dimers: int = 41,
    *,
    nu: float = 1.0,
    boundary: Boundary = Boundary.PERIODIC,
    jobs: int = 1,
) -> SweepGrid:
    """Spectrum-based PT phase label for every grid cell.

    Periodic lattices are the default: they carry the bulk phase. Open chains
    with ``nu' > nu`` host edge modes on a single sublattice whose eigenvalues
    sit near ``+-i gamma``, so their spectrum is complex for any ``gamma > 0``.
    """
    ratios = [float(r) for r in nu_prime_over_nu]
    gammas = [float(g) for g in gamma_over_nu]
    shape = (len(ratios), len(gammas))
    grid = SweepGrid(
        ratios,
        gammas,
        n_dimers,
        Boundary(boundary),
        phase=np.full(shape, None, dtype=object),
        on_boundary=np.zeros(shape, dtype=bool),
        gamma_pt_finite=np.full(shape, np.nan),
        max_imag=np.full(shape, np.nan),
        failed=np.zeros(shape, dtype=bool),
    )
    cells = list(grid.cells())

    def work(cell):
        _, _, r, g = cell
        try:
            return _classify_cell(nu, r, g, n_dimers, grid.boundary)
        except PTDimerError:
            return None

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(work, cells))
    for (i, j, r, g), res in zip(cells, results):
        grid.on_boundary[i, j] = abs(g - abs(1.0 - r)) <= LINE_TOL
        if res is None:
            grid.failed[i, j] = True
            continue
        grid.phase[i, j], grid.max_imag[i, j], grid.gamma_pt_finite[i, j] = res
    return grid


@dataclass(frozen=True)
class DisorderStats:
    mean: float
    std: float
    values: np.ndarray = field(repr=False)
    failures: int = 0


def disorder_hamiltonian(params: LatticeParams, strength: float, rng) -> np.ndarray:
    """PT Hamiltonian with every bond scaled by ``1 + u``, ``u ~ U[-strength, strength]``."""
    n = params.n_dimers
    n_inter = n if params.boundary is Boundary.PERIODIC else n - 1
    intra = 1.0 + rng.uniform(-strength, strength, n)
    inter = 1.0 + rng.uniform(-strength, strength, n_inter)
    return build_hamiltonian(params.with_(model=Model.PT_SYMMETRIC), intra, inter)


def disorder_robustness(
    params: LatticeParams,
    init: InitialSpec,
    strength: float,
    n_realizations: int,
    seed: int,
    q: QuadratureSettings | None = None,
    jobs: int = 1,
) -> DisorderStats:
    """Mean and standard deviation of ``delta_m_pt`` under multiplicative bond disorder.

    Realization ``i`` draws from ``default_rng([seed, i])``, so results do not
    depend on ``jobs``.
    """
    if strength < 0:
        raise InvalidParameters(f"strength must be >= 0, got {strength}")
    if n_realizations < 1:
        raise InvalidParameters("n_realizations must be >= 1")

    def work(i):
        rng = np.random.default_rng([seed, i])
        h = disorder_hamiltonian(params, strength, rng)
        try:
            return absorbed_distribution(params, init, q, h=h, strict=False).delta_m_pt
        except PTDimerError:
            return math.nan

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        values = np.array(list(pool.map(work, range(n_realizations))))
    ok = values[np.isfinite(values)]
    if ok.size == 0:
        raise NonConvergent("every disorder realization failed")
    return DisorderStats(float(ok.mean()), float(ok.std()), values, int(values.size - ok.size))
