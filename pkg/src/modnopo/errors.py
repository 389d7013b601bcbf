"""Exception types shared across the simulation modules."""


class InvalidParameterError(ValueError):
    """A model parameter violates its documented invariant."""


class BelowThresholdError(RuntimeError):
    """The asymptotic photon-number integral diverges (period-averaged pump
    at or below threshold); the caller must fall back to the zero orbit."""


class TruncationError(RuntimeError):
    """A tail bound was not met: either a quadrature tail failed to satisfy
    its stopping criteria within the hard cap, or a truncated Fock state
    accumulated too much population near the cutoff."""


class ConvergenceError(RuntimeError):
    """Period-to-period convergence was not reached within max_periods."""


class CrossCheckError(RuntimeError):
    """The two independent computational routes (direct ODE integration and
    closed-form quadrature) disagree beyond the allowed tolerance."""


class DivergenceError(RuntimeError):
    """A single phase-space trajectory exceeded the divergence guard."""


class DivergenceBudgetError(RuntimeError):
    """The fraction of discarded (diverged) trajectories exceeded the
    acceptable budget; ensemble averages would be biased."""


class FockDimensionError(ValueError):
    """Requested Fock truncation exceeds the configured memory budget."""
