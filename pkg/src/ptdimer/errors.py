"""Exception types raised across the package."""


class PTDimerError(Exception):
    """Base class for all package errors."""


class InvalidParameters(PTDimerError, ValueError):
    """A constructor or operation precondition was violated."""


class EigensolverError(PTDimerError):
    """The dense eigensolver failed to converge."""


class DegenerateWinding(PTDimerError):
    """The tunneling curve passes through the origin; winding is undefined."""


class ScaleOverflow(PTDimerError, OverflowError):
    """Amplitudes would leave the floating-point range.

    Re-run with log-scale bookkeeping enabled (the default for ``evolve``)."""


class StepUnderflow(PTDimerError):
    """The integrator step size fell below its floor."""


class GammaZero(PTDimerError, ValueError):
    """Absorption observables are undefined without loss."""


class NonConvergent(PTDimerError):
    """Residual mass stayed above the tail tolerance after all extensions.

    The partial result is attached as ``report``."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotBroken(PTDimerError, ValueError):
    """A broken-phase formula was requested outside the broken phase."""


class AllZeroProfile(PTDimerError, ValueError):
    """Peak analysis of an identically zero profile."""


class ConfigError(PTDimerError, ValueError):
    """Run configuration failed schema or precondition validation."""

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
