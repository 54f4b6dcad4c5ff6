"""Non-unitary time evolution on the dimer lattice.

Three engines are provided:

* :func:`evolve` reuses one dense step propagator ``exp(-iH dt)``,
* :func:`evolve_oracle` is a fixed-step RK4 integrator kept only for
  cross-validation,
* :func:`evolve_bloch` applies the exact 2x2 block evolution in momentum
  space (periodic lattices only).

States are carried as a unit vector plus an accumulated log-norm so that
broken-phase growth of many decades does not overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from . import kernels
from .errors import InvalidParameters, ScaleOverflow, StepUnderflow
from .lattice import Boundary, LatticeParams, Model, build_hamiltonian, eigenmomenta

LOG_FLOAT_MAX = math.log(np.finfo(float).max)
EDGE_FRACTION = 1e-6
EP_CUTOFF = 1e-8
RK4_LOCAL_TOL = 1e-15
RK4_MIN_STEP = 1e-12


@dataclass(frozen=True)
class InitialSpec:
    """``cos(theta)|m0 G> + sin(theta) e^{i phi}|m0 L>``."""

    dimer: int = 0
    theta: float = 0.0
    phi: float = 0.0


GAIN_SITE = InitialSpec()
LOSS_SITE = InitialSpec(theta=np.pi / 2)


def initial_state(params: LatticeParams, spec: InitialSpec = GAIN_SITE) -> np.ndarray:
    psi = np.zeros(params.n_sites, dtype=complex)
    g = params.site_index(spec.dimer, 0)
    psi[g] = np.cos(spec.theta)
    psi[g + 1] = np.sin(spec.theta) * np.exp(1j * spec.phi)
    return psi


def sublattice_intensities(state) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimer ``(|psi_G|^2, |psi_L|^2)``."""
    state = np.asarray(state)
    if state.ndim != 1 or state.shape[0] % 2:
        raise InvalidParameters("state must be a 1-D vector of even length")
    intensity = state.real**2 + state.imag**2
    return intensity[0::2], intensity[1::2]


def growth_bound(h: np.ndarray) -> float:
    """Logarithmic 2-norm of ``-iH``: ``||exp(-iHt)|| <= exp(t * growth_bound)``."""
    skew = (h - h.conj().T) / 2j
    return float(np.linalg.eigvalsh(skew)[-1])


def propagator(h: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i H dt)`` by scaling and squaring with a Pade core (no eigendecomposition)."""
    if not dt > 0:
        raise InvalidParameters(f"dt must be > 0, got {dt}")
    h = np.asarray(h, dtype=complex)
    if growth_bound(h) * dt > LOG_FLOAT_MAX - math.log(h.shape[0]):
        raise ScaleOverflow(
            f"exp(-iH*{dt}) may exceed the float range; split the interval and "
            "track the log-norm per step"
        )
    return scipy.linalg.expm(-1j * dt * h)


@dataclass(frozen=True)
class Trajectory:
    """Sampled evolution; state at ``times[i]`` is ``exp(log_norm[i]) * unit_states[i]``.

    Intensity grids are dimer-major: shape ``(n_dimers, n_times)``.
    """

    times: np.ndarray
    unit_states: np.ndarray = field(repr=False)
    log_norm: np.ndarray = field(repr=False)
    edge_contact_time: float | None = None

    @property
    def n_dimers(self) -> int:
        return self.unit_states.shape[1] // 2

    @property
    def states(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.unit_states * np.exp(self.log_norm)[:, None]

    def _intensity(self, sub):
        u = self.unit_states[:, sub::2]
        with np.errstate(over="ignore"):
            return ((u.real**2 + u.imag**2) * np.exp(2 * self.log_norm)[:, None]).T

    @property
    def intensity_g(self) -> np.ndarray:
        return self._intensity(0)

    @property
    def intensity_l(self) -> np.ndarray:
        return self._intensity(1)

    @property
    def total(self) -> np.ndarray:
        u = self.unit_states
        with np.errstate(over="ignore"):
            return np.sum(u.real**2 + u.imag**2, axis=1) * np.exp(2 * self.log_norm)

    def log10_intensity(self, sub) -> np.ndarray:
        """``log10`` of a sublattice intensity grid, computed without overflow."""
        sub = 0 if sub in ("G", 0) else 1
        u = self.unit_states[:, sub::2]
        with np.errstate(divide="ignore"):
            rel = np.log10(u.real**2 + u.imag**2)
        return (rel + (2 / math.log(10)) * self.log_norm[:, None]).T

    def at(self, index: int) -> np.ndarray:
        return self.unit_states[index] * math.exp(self.log_norm[index])

    def trusted(self) -> np.ndarray:
        """Mask of times before the edge-contact guard fired."""
        if self.edge_contact_time is None:
            return np.ones(self.times.shape, dtype=bool)
        return self.times < self.edge_contact_time


def _edge_contact(times, unit_states, boundary):
    if boundary is Boundary.PERIODIC:
        return None
    outer = unit_states[:, [0, 1, -2, -1]]
    frac = np.sum(outer.real**2 + outer.imag**2, axis=1)
    hit = np.flatnonzero(frac > EDGE_FRACTION)
    return float(times[hit[0]]) if hit.size else None


def _as_state(params, init):
    if isinstance(init, InitialSpec):
        return initial_state(params, init)
    psi = np.asarray(init, dtype=complex)
    if psi.shape != (params.n_sites,):
        raise InvalidParameters(f"state must have length {params.n_sites}, got {psi.shape}")
    return psi


def evolve(
    params: LatticeParams,
    init,
    t_max: float,
    n_steps: int,
    *,
    h: np.ndarray | None = None,
    log_bookkeeping: bool = True,
) -> Trajectory:
    """Evolve on the uniform grid ``linspace(0, t_max, n_steps + 1)`` with one reused step propagator."""
    if not t_max > 0:
        raise InvalidParameters(f"t_max must be > 0, got {t_max}")
    if n_steps < 1:
        raise InvalidParameters(f"n_steps must be >= 1, got {n_steps}")
    psi0 = _as_state(params, init)
    if h is None:
        h = build_hamiltonian(params)
    times = np.linspace(0.0, t_max, n_steps + 1)
    step = propagator(h, t_max / n_steps)

    if log_bookkeeping:
        units, logs = kernels.propagate_record(np.ascontiguousarray(step), psi0.copy(), n_steps)
    else:
        if growth_bound(h) * t_max > LOG_FLOAT_MAX:
            raise ScaleOverflow("amplitudes may overflow; enable log_bookkeeping")
        raw = np.empty((n_steps + 1, psi0.size), dtype=complex)
        raw[0] = psi0
        for i in range(n_steps):
            raw[i + 1] = step @ raw[i]
        norms = np.linalg.norm(raw, axis=1)
        if not np.all(np.isfinite(norms)):
            raise ScaleOverflow("amplitudes overflowed; enable log_bookkeeping")
        units = raw / norms[:, None]
        logs = np.log(norms)
    return Trajectory(times, units, logs, _edge_contact(times, units, params.boundary))


def _rk4_unit_step(local_tol):
    # largest x = ||H|| dt with Taylor remainder x^5 e^x / 5! below local_tol
    return brentq(lambda x: x**5 * math.exp(x) / 120.0 - local_tol, 1e-9, 1.0)


def evolve_oracle(
    params: LatticeParams,
    init,
    t_max: float,
    n_steps: int = 100,
    *,
    h: np.ndarray | None = None,
    local_tol: float = RK4_LOCAL_TOL,
) -> Trajectory:
    """Classic RK4 reference integrator of ``dpsi/dt = -iH psi``.

    The step bounds the local truncation error by ``local_tol`` times the
    current norm and is aligned to the ``n_steps`` recording grid. Global error
    ends up a few decades above ``local_tol``, hence the tight default. Never
    used by sweeps.
    """
    if not t_max > 0 or n_steps < 1:
        raise InvalidParameters("need t_max > 0 and n_steps >= 1")
    psi = _as_state(params, init)
    if h is None:
        h = build_hamiltonian(params)
    a = -1j * np.asarray(h, dtype=complex)
    h_norm = np.linalg.norm(h, 2)
    interval = t_max / n_steps
    dt_max = _rk4_unit_step(local_tol) / h_norm if h_norm > 0 else interval
    substeps = max(1, math.ceil(interval / dt_max))
    dt = interval / substeps
    if dt < RK4_MIN_STEP:
        raise StepUnderflow(f"RK4 step {dt:.3e} below {RK4_MIN_STEP}")

    times = np.linspace(0.0, t_max, n_steps + 1)
    units = np.empty((n_steps + 1, psi.size), dtype=complex)
    logs = np.empty(n_steps + 1)
    s = np.linalg.norm(psi)
    u = psi / s
    units[0], logs[0] = u, math.log(s)
    for i in range(1, n_steps + 1):
        for _ in range(substeps):
            k1 = a @ u
            k2 = a @ (u + 0.5 * dt * k1)
            k3 = a @ (u + 0.5 * dt * k2)
            k4 = a @ (u + dt * k3)
            u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        s = np.linalg.norm(u)
        u = u / s
        units[i], logs[i] = u, logs[i - 1] + math.log(s)
    return Trajectory(times, units, logs, _edge_contact(times, units, params.boundary))


def _block_factors(e, t, shift):
    """``exp(-shift t) cos(e t)`` and ``exp(-shift t) sin(e t)/e`` for complex ``e``."""
    small = np.abs(e) < EP_CUTOFF
    safe = np.where(small, 1.0, e)
    plus = np.exp((1j * safe - shift) * t)
    minus = np.exp((-1j * safe - shift) * t)
    c = 0.5 * (plus + minus)
    s = (plus - minus) / (2j * safe)
    damp = math.exp(-shift * t)
    e2 = e * e
    c = np.where(small, damp * (1 - e2 * t * t / 2), c)
    s = np.where(small, damp * (t - e2 * t**3 / 6), s)
    return c, s


def evolve_bloch(params: LatticeParams, init, times) -> Trajectory:
    """Exact evolution of a periodic lattice block by block in momentum space.

    Each block evolves as ``cos(e_k t) - i H_k sin(e_k t)/e_k`` with
    ``e_k^2 = |nu_k|^2 - gamma^2``; this is trigonometric for real ``e_k``,
    hyperbolic for imaginary ``e_k`` and the Taylor limit at exceptional points.
    """
    if params.boundary is not Boundary.PERIODIC:
        raise InvalidParameters("evolve_bloch requires a periodic lattice")
    psi = _as_state(params, init)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    n = params.n_dimers
    m = params.dimers()
    ks = eigenmomenta(params)
    fourier = np.exp(-1j * np.outer(ks, m)) / math.sqrt(n)
    amp_k = fourier @ psi.reshape(n, 2)

    gamma = params.gamma
    nu_k = params.nu + params.nu_prime * np.exp(1j * ks)
    h_k = np.empty((n, 2, 2), dtype=complex)
    h_k[:, 0, 0] = 1j * gamma
    h_k[:, 1, 1] = -1j * gamma
    h_k[:, 0, 1] = -np.conj(nu_k)
    h_k[:, 1, 0] = -nu_k
    if params.model is Model.LOSSY:
        h_k[:, 0, 0] -= 1j * gamma
        h_k[:, 1, 1] -= 1j * gamma
    e = np.sqrt((np.abs(nu_k) ** 2 - gamma**2).astype(complex))
    # exp(-i h t) = exp(-i tr(h)/2 t) [cos(e t) - i (h - tr/2) sin(e t)/e]
    centre = 0.5 * (h_k[:, 0, 0] + h_k[:, 1, 1])
    traceless = h_k - centre[:, None, None] * np.eye(2)
    # blocks are evaluated scaled by exp(-rate t); rate is added back to the log-norm
    rate = float(np.max(np.abs(e.imag)))

    units = np.empty((times.size, psi.size), dtype=complex)
    logs = np.empty(times.size)
    for i, t in enumerate(times):
        c, s = _block_factors(e, t, rate)
        phase = np.exp(-1j * centre * t)
        prop = phase[:, None, None] * (
            c[:, None, None] * np.eye(2) - 1j * s[:, None, None] * traceless
        )
        evolved = np.einsum("kab,kb->ka", prop, amp_k)
        state = (fourier.conj().T @ evolved).reshape(-1)
        norm = np.linalg.norm(state)
        units[i] = state / norm
        logs[i] = math.log(norm) + rate * t
    return Trajectory(times, units, logs, None)
