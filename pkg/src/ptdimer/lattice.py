"""Dimer-lattice Hamiltonians, Bloch blocks, spectra and the winding number.

Site order is interleaved and ascending in dimer index:
``(-M, G), (-M, L), (-M+1, G), ... , (M, L)``, so site ``(m, s)`` lives at
row ``2*(m + M) + s`` with ``s = 0`` for the gain site and ``1`` for the loss
site. Every module and every exported file uses this order.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWinding, EigensolverError, InvalidParameters

TOL_IMAG_REL = 1e-9
TOL_ORIGIN_REL = 1e-8


class Boundary(str, enum.Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class Model(str, enum.Enum):
    PT_SYMMETRIC = "pt_symmetric"
    LOSSY = "lossy"


class Sublattice(enum.IntEnum):
    G = 0
    L = 1


class PhaseLabel(str, enum.Enum):
    PT_SYMMETRIC = "pt_symmetric"
    PT_BROKEN = "pt_broken"


@dataclass(frozen=True)
class LatticeParams:
    """Geometry and couplings of a finite dimer lattice with ``n_dimers = 2M+1``."""

    n_dimers: int
    nu: float
    nu_prime: float
    gamma: float
    boundary: Boundary = Boundary.OPEN
    model: Model = Model.PT_SYMMETRIC

    def __post_init__(self):
        n = self.n_dimers
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise InvalidParameters(f"n_dimers must be an integer, got {n!r}")
        if n < 3 or n % 2 == 0:
            raise InvalidParameters(f"n_dimers must be odd and >= 3, got {n}")
        for name in ("nu", "nu_prime", "gamma"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise InvalidParameters(f"{name} must be finite, got {value!r}")
        if not self.nu > 0:
            raise InvalidParameters(f"nu must be > 0, got {self.nu}")
        if self.nu_prime < 0:
            raise InvalidParameters(f"nu_prime must be >= 0, got {self.nu_prime}")
        if self.gamma < 0:
            raise InvalidParameters(f"gamma must be >= 0, got {self.gamma}")
        object.__setattr__(self, "n_dimers", int(n))
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "nu_prime", float(self.nu_prime))
        object.__setattr__(self, "gamma", float(self.gamma))
        try:
            object.__setattr__(self, "boundary", Boundary(self.boundary))
            object.__setattr__(self, "model", Model(self.model))
        except ValueError as exc:
            raise InvalidParameters(str(exc)) from None

    @property
    def half_width(self) -> int:
        """M, the largest dimer index."""
        return self.n_dimers // 2

    @property
    def n_sites(self) -> int:
        return 2 * self.n_dimers

    def dimers(self) -> np.ndarray:
        """Dimer indices ``-M..M`` in site order."""
        return np.arange(-self.half_width, self.half_width + 1)

    def site_index(self, dimer: int, sublattice) -> int:
        m_max = self.half_width
        if not -m_max <= dimer <= m_max:
            raise InvalidParameters(f"dimer {dimer} outside [-{m_max}, {m_max}]")
        return 2 * (int(dimer) + m_max) + int(Sublattice[sublattice] if isinstance(sublattice, str) else sublattice)

    def with_(self, **changes) -> "LatticeParams":
        from dataclasses import replace

        return replace(self, **changes)


def build_hamiltonian(params: LatticeParams, intra_scale=None, inter_scale=None) -> np.ndarray:
    """Dense ``2N x 2N`` Hamiltonian in interleaved site order.

    ``intra_scale`` (length N) and ``inter_scale`` (length N-1 open, N periodic)
    multiply individual bonds; they exist for disorder studies.
    """
    n = params.n_dimers
    intra = np.full(n, params.nu)
    n_inter = n if params.boundary is Boundary.PERIODIC else n - 1
    inter = np.full(n_inter, params.nu_prime)
    if intra_scale is not None:
        intra_scale = np.asarray(intra_scale, dtype=float)
        if intra_scale.shape != (n,):
            raise InvalidParameters(f"intra_scale must have shape ({n},)")
        intra = intra * intra_scale
    if inter_scale is not None:
        inter_scale = np.asarray(inter_scale, dtype=float)
        if inter_scale.shape != (n_inter,):
            raise InvalidParameters(f"inter_scale must have shape ({n_inter},)")
        inter = inter * inter_scale

    h = np.zeros((2 * n, 2 * n), dtype=complex)
    g = np.arange(0, 2 * n, 2)
    l = g + 1
    h[g, l] = h[l, g] = -intra
    # L of dimer j couples to G of dimer j+1; the periodic wrap closes (M,L)-(-M,G)
    src = l[:n_inter]
    dst = (g[:n_inter] + 2) % (2 * n)
    h[src, dst] = h[dst, src] = -inter

    gamma = params.gamma
    if params.model is Model.PT_SYMMETRIC:
        h[g, g] = 1j * gamma
        h[l, l] = -1j * gamma
    else:
        h[l, l] = -2j * gamma
    return h


def eigenmomenta(params: LatticeParams) -> np.ndarray:
    """Momentum grid: ``n*pi/(N+1)`` (open, n=1..N) or ``2*pi*n/N`` (periodic, |n|<=N/2)."""
    n = params.n_dimers
    if params.boundary is Boundary.OPEN:
        return np.arange(1, n + 1) * np.pi / (n + 1)
    m_max = n // 2
    return 2 * np.pi * np.arange(-m_max, m_max + 1) / n


@dataclass(frozen=True)
class BlochBlock:
    k: float
    nu_k: complex
    h_k: np.ndarray = field(repr=False)
    eps_k: tuple
    gamma: float


def bloch_block(params: LatticeParams, k: float, lossy: bool = False) -> BlochBlock:
    """2x2 block ``i*gamma*sz - Re(nu_k)*sx - Im(nu_k)*sy`` at momentum ``k``.

    With ``lossy=True`` the block and its eigenvalues are shifted by ``-i*gamma``.
    """
    gamma = params.gamma
    nu_k = params.nu + params.nu_prime * np.exp(1j * k)
    h_k = np.array(
        [[1j * gamma, -np.conj(nu_k)], [-nu_k, -1j * gamma]],
        dtype=complex,
    )
    eps = np.sqrt(complex(abs(nu_k) ** 2 - gamma**2))
    pair = (eps, -eps)
    if lossy:
        h_k = h_k - 1j * gamma * np.eye(2)
        pair = (eps - 1j * gamma, -eps - 1j * gamma)
    return BlochBlock(k=float(k), nu_k=complex(nu_k), h_k=h_k, eps_k=pair, gamma=gamma)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    phase: PhaseLabel
    max_imag: float
    condition: float


def tol_imag(params: LatticeParams) -> float:
    return TOL_IMAG_REL * max(params.nu, params.gamma)


def spectrum(params: LatticeParams, h=None) -> SpectrumReport:
    """Dense eigenvalues, PT phase label and eigenvector condition number.

    The condition number blows up near exceptional points. For the lossy model
    the label refers to the equivalent PT-symmetric spectrum (shifted by +i*gamma).
    """
    if h is None:
        h = build_hamiltonian(params)
    try:
        evals, evecs = np.linalg.eig(h)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"dense eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(evals)):
        raise EigensolverError("dense eigensolver returned non-finite eigenvalues")
    order = np.lexsort((evals.imag, evals.real))
    evals = evals[order]
    shifted = evals + 1j * params.gamma if params.model is Model.LOSSY else evals
    max_imag = float(np.max(np.abs(shifted.imag)))
    phase = PhaseLabel.PT_BROKEN if max_imag > tol_imag(params) else PhaseLabel.PT_SYMMETRIC
    with np.errstate(all="ignore"):
        condition = float(np.linalg.cond(evecs))
    return SpectrumReport(evals, phase, max_imag, condition)


@dataclass(frozen=True)
class ThresholdReport:
    gamma_pt_infinite: float
    gamma_pt_finite: float
    momenta: np.ndarray = field(repr=False)
    gamma_pt_dense: float | None = None

    @property
    def grid_discrepancy(self) -> float | None:
        """Grid estimate minus the bisected dense threshold, if one was computed."""
        if self.gamma_pt_dense is None:
            return None
        return self.gamma_pt_finite - self.gamma_pt_dense


def pt_threshold(params: LatticeParams, dense: bool = False, atol: float = 1e-6) -> ThresholdReport:
    """PT-breaking thresholds: ``|nu - nu'|`` and the min of ``|nu_k|`` over the k grid.

    On open lattices the momentum grid is only an approximation to the true
    eigenmomenta; pass ``dense=True`` to also bisect the dense spectrum.
    """
    ks = eigenmomenta(params)
    nu_k = np.abs(params.nu + params.nu_prime * np.exp(1j * ks))
    dense_value = dense_threshold(params, atol=atol) if dense else None
    return ThresholdReport(
        gamma_pt_infinite=abs(params.nu - params.nu_prime),
        gamma_pt_finite=float(nu_k.min()),
        momenta=ks,
        gamma_pt_dense=dense_value,
    )


def dense_threshold(params: LatticeParams, atol: float = 1e-6, hi: float | None = None) -> float:
    """Bisect the gain/loss strength at which the dense spectrum turns complex.

    Returns the largest bracketed value still labelled PT-symmetric. The
    ``gamma`` of ``params`` is ignored.
    """
    base = params.with_(model=Model.PT_SYMMETRIC)
    lo = 0.0
    hi = params.nu + params.nu_prime + 1.0 if hi is None else float(hi)

    def broken(gamma):
        # eigenvalues only; the condition number is not needed here
        trial = base.with_(gamma=gamma)
        try:
            evals = np.linalg.eigvals(build_hamiltonian(trial))
        except np.linalg.LinAlgError as exc:
            raise EigensolverError(f"dense eigensolver failed: {exc}") from exc
        return float(np.max(np.abs(evals.imag))) > tol_imag(trial)

    if not broken(hi):
        raise InvalidParameters(f"spectrum still real at gamma={hi}; widen the bracket")
    while hi - lo > atol:
        mid = 0.5 * (lo + hi)
        if broken(mid):
            hi = mid
        else:
            lo = mid
    return lo


def winding_number(nu: float, nu_prime: float, k_samples: int = 1024) -> int:
    """Winding of ``nu + nu' exp(-ik)`` around the origin over one Brillouin zone.

    0 for ``nu' < nu`` and -1 for ``nu' > nu``.
    """
    if k_samples < 64:
        raise InvalidParameters(f"k_samples must be >= 64, got {k_samples}")
    if not nu > 0 or nu_prime < 0:
        raise InvalidParameters("need nu > 0 and nu_prime >= 0")
    # |nu + nu' e^{-ik}| is minimal at k = pi
    if abs(nu - nu_prime) < TOL_ORIGIN_REL * nu:
        raise DegenerateWinding(f"curve passes through the origin (nu={nu}, nu'={nu_prime})")
    k = np.linspace(0.0, 2 * np.pi, k_samples, endpoint=False)
    z = nu + nu_prime * np.exp(-1j * k)
    steps = np.angle(np.roll(z, -1) / z)
    return int(np.rint(steps.sum() / (2 * np.pi)))
