"""Pure numpy fallback for the compiled stepping loops in ``_kernels.pyx``."""
import numpy as np


def propagate_record(U, u0, n_steps):
    """Apply ``U`` ``n_steps`` times, storing unit states and accumulated log-norms."""
    n = U.shape[0]
    if u0.shape[0] != n:
        raise ValueError("state length does not match propagator")
    states = np.empty((n_steps + 1, n), dtype=complex)
    logs = np.empty(n_steps + 1)
    s = np.linalg.norm(u0)
    if s == 0.0:
        raise ValueError("initial state is zero")
    states[0] = u0 / s
    logs[0] = np.log(s)
    for step in range(1, n_steps + 1):
        v = U @ states[step - 1]
        s = np.sqrt(np.vdot(v, v).real)
        if s == 0.0:
            raise FloatingPointError("state annihilated by propagator")
        states[step] = v / s
        logs[step] = logs[step - 1] + np.log(s)
    return states, logs


def absorb_steps(U, u, n_steps, log_amp, log_drift, acc):
    """Step ``u`` in place, adding ``exp(2*log_amp) |u_L(m)|^2`` to ``acc`` after each step."""
    n = U.shape[0]
    if u.shape[0] != n or acc.shape[0] != n // 2:
        raise ValueError("array shapes do not match propagator")
    for _ in range(n_steps):
        v = U @ u
        s = np.sqrt(np.vdot(v, v).real)
        if s == 0.0:
            raise FloatingPointError("state annihilated by propagator")
        log_amp += np.log(s) + log_drift
        u[:] = v / s
        loss = u[1::2]
        acc += np.exp(2.0 * log_amp) * (loss.real**2 + loss.imag**2)
    return float(log_amp)
