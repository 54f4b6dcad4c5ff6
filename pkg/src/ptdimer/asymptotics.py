"""Long-time broken-phase wavefunctions and profile shape analysis.

In the broken phase the dynamics is dominated by momenta near ``k = pi``
where ``Gamma_k = sqrt(gamma^2 - |nu_k|^2)`` peaks at
``Gamma = sqrt(gamma^2 - (nu - nu')^2)``. Expanding ``Gamma_{pi+p}`` to second
order in ``p`` turns every sublattice amplitude into a diffusing Gaussian
with diffusion constant ``D = nu nu' / Gamma``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroProfile, InvalidParameters, NotBroken
from .lattice import BlochBlock


class OutOfValidity(UserWarning):
    """Closed forms evaluated outside their long-time regime."""


@dataclass(frozen=True)
class AsymptoticParams:
    gamma_pt: float
    big_gamma: float
    diffusion: float

    @classmethod
    def from_couplings(cls, nu: float, nu_prime: float, gamma: float) -> "AsymptoticParams":
        gamma_pt = abs(nu - nu_prime)
        if not gamma > gamma_pt:
            raise NotBroken(f"gamma={gamma} is not above the threshold {gamma_pt}")
        if not nu_prime > 0 or not nu > 0:
            raise InvalidParameters("diffusion needs nu > 0 and nu' > 0")
        big_gamma = math.sqrt(gamma * gamma - gamma_pt * gamma_pt)
        return cls(gamma_pt, big_gamma, nu * nu_prime / big_gamma)


def broken_block_propagator(block: BlochBlock, t: float) -> np.ndarray:
    """``cosh(G t) - i (H_k / G) sinh(G t)`` with ``G = sqrt(gamma^2 - |nu_k|^2)``."""
    rate_sq = block.gamma**2 - abs(block.nu_k) ** 2
    if not rate_sq > 0:
        raise NotBroken(f"|nu_k|={abs(block.nu_k):.6g} >= gamma={block.gamma:.6g}")
    if t < 0:
        raise InvalidParameters("t must be >= 0")
    rate = math.sqrt(rate_sq)
    # traceless part; the lossy flag shifts the block by -i gamma
    centre = 0.5 * np.trace(block.h_k)
    h = block.h_k - centre * np.eye(2)
    g = math.cosh(rate * t) * np.eye(2) - 1j * (h / rate) * math.sinh(rate * t)
    return np.exp(-1j * centre * t) * g


def analytic_wavefunctions(
    nu: float,
    nu_prime: float,
    gamma: float,
    init_sublattice: str,
    m,
    t: float,
    signed: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Long-time ``(psi_G(m), psi_L(m))`` for a start on the central gain or loss site.

    Gain start::

        psi_G ~ (-1)^m e^{Gt}/sqrt(8 pi D t) (1 + gamma/G) exp(-m^2/2Dt)
        psi_L ~ i(-1)^m e^{Gt}/(G sqrt(8 pi D t)) [nu g(m) - nu' g(m+1)]

    Loss start::

        psi_G ~ i(-1)^m e^{Gt}/(G sqrt(8 pi D t)) [nu g(m) - nu' g(m-1)]
        psi_L ~ (-1)^m e^{Gt}/sqrt(8 pi D t) g(m)
                [1 - (gamma/G)(1 + 1/(2Gt) - m^2/(2 nu nu' t^2))]

    with ``g(x) = exp(-x^2/2Dt)``. Warns :class:`OutOfValidity` when
    ``Gt < 3`` or ``Dt < 1``. ``signed=False`` drops the ``(-1)^m`` factor.
    """
    ap = AsymptoticParams.from_couplings(nu, nu_prime, gamma)
    if not t > 0:
        raise InvalidParameters("t must be > 0")
    big_gamma, d = ap.big_gamma, ap.diffusion
    if big_gamma * t < 3 or d * t < 1:
        warnings.warn(
            f"Gamma t = {big_gamma * t:.3g}, D t = {d * t:.3g}: outside the long-time regime",
            OutOfValidity,
            stacklevel=2,
        )
    m = np.asarray(m, dtype=float)
    spread = d * t

    def gauss(shift):
        return np.exp(-((m + shift) ** 2) / (2 * spread))

    sign = np.where(np.mod(m, 2) == 0, 1.0, -1.0) if signed else np.ones_like(m)
    prefactor = sign * math.exp(big_gamma * t) / math.sqrt(8 * math.pi * spread)
    sub = init_sublattice.upper()
    if sub == "G":
        psi_g = prefactor * (1 + gamma / big_gamma) * gauss(0)
        psi_l = 1j * prefactor / big_gamma * (nu * gauss(0) - nu_prime * gauss(1))
    elif sub == "L":
        psi_g = 1j * prefactor / big_gamma * (nu * gauss(0) - nu_prime * gauss(-1))
        bracket = 1 - (gamma / big_gamma) * (
            1 + 1 / (2 * big_gamma * t) - m**2 / (2 * nu * nu_prime * t * t)
        )
        psi_l = (prefactor * gauss(0) * bracket).astype(complex)
    else:
        raise InvalidParameters(f"init_sublattice must be 'G' or 'L', got {init_sublattice!r}")
    return psi_g.astype(complex), psi_l


def node_positions(nu: float, gamma: float, t: float) -> tuple[float, float]:
    """Zeros ``-+sqrt(nu^2 t / gamma)`` of the loss-site profile at ``nu = nu'``."""
    if not gamma > 0 or t < 0:
        raise InvalidParameters("need gamma > 0 and t >= 0")
    if t == 0:
        warnings.warn("nodes coincide at t = 0", OutOfValidity, stacklevel=2)
    r = math.sqrt(nu * nu * t / gamma)
    return -r, r


@dataclass(frozen=True)
class ModalityReport:
    n_peaks: int
    peak_positions: np.ndarray
    symmetry_axis: float | None
    minima_positions: np.ndarray


def _runs(values):
    """Collapse runs of equal values: (start index, value) per run."""
    change = np.flatnonzero(np.diff(values) != 0) + 1
    starts = np.concatenate(([0], change))
    return starts, values[starts]


def modality(profile, m=None, rel_threshold: float = 1e-3, symmetry_tol: float = 0.05) -> ModalityReport:
    """Count peaks of a non-negative profile sampled on dimers ``m``.

    A peak is a run of equal values higher than both neighbouring runs
    (one neighbour at the ends) and above ``rel_threshold * max``; a plateau
    reports its leftmost index. Minima are interior runs lower than both
    neighbours. The symmetry axis is the intensity-weighted centre when the
    profile reflected about it differs by less than ``symmetry_tol`` in L1.
    """
    p = np.asarray(profile, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidParameters("profile must be a non-empty 1-D array")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidParameters("profile must be finite and non-negative")
    top = p.max()
    if top == 0:
        raise AllZeroProfile("profile is identically zero")
    if m is None:
        m = np.arange(p.size) - p.size // 2
    m = np.asarray(m, dtype=float)

    starts, vals = _runs(p)
    left = np.concatenate(([-np.inf], vals[:-1]))
    right = np.concatenate((vals[1:], [-np.inf]))
    is_peak = (vals > left) & (vals > right) & (vals > rel_threshold * top)
    inner = np.zeros(vals.size, dtype=bool)
    inner[1:-1] = True
    is_min = inner & (vals < left) & (vals < right)

    centre = float(m @ p / p.sum())
    mirrored = np.interp(2 * centre - m, m, p, left=0.0, right=0.0)
    residual = np.abs(p - mirrored).sum() / p.sum()
    return ModalityReport(
        n_peaks=int(is_peak.sum()),
        peak_positions=m[starts[is_peak]],
        symmetry_axis=centre if residual < symmetry_tol else None,
        minima_positions=m[starts[is_min]],
    )


def compare_profiles(numeric, analytic, m=None, window: float | None = None) -> float:
    """Relative L2 distance of unit-sum normalized profiles, restricted to ``|m| <= window``."""
    n = np.asarray(numeric, dtype=float)
    a = np.asarray(analytic, dtype=float)
    if n.shape != a.shape:
        raise InvalidParameters(f"shape mismatch {n.shape} vs {a.shape}")
    if m is None:
        m = np.arange(n.size) - n.size // 2
    n = n / n.sum()
    a = a / a.sum()
    keep = np.ones(n.shape, dtype=bool) if window is None else np.abs(np.asarray(m)) <= window
    return float(np.linalg.norm((n - a)[keep]) / np.linalg.norm(a[keep]))


def comparison_window(nu: float, nu_prime: float, gamma: float, t: float) -> float:
    """``3 sqrt(D t)``, the dimer range used by :func:`compare_profiles`."""
    return 3.0 * math.sqrt(AsymptoticParams.from_couplings(nu, nu_prime, gamma).diffusion * t)


def deepest_minima(profile, m) -> tuple[float | None, float | None]:
    """Deepest interior local minimum on each side of ``m = 0``."""
    p = np.asarray(profile, dtype=float)
    m = np.asarray(m)
    rep = modality(p, m)
    out = []
    for side in (rep.minima_positions < 0, rep.minima_positions > 0):
        cands = rep.minima_positions[side]
        if cands.size == 0:
            out.append(None)
            continue
        idx = np.searchsorted(m, cands)
        out.append(float(cands[np.argmin(p[idx])]))
    return out[0], out[1]
