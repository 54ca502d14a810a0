"""Exception and warning types shared across the package."""


class FttSimError(Exception):
    """Base class for all ftt_sim errors."""


class ConfigError(FttSimError):
    """Malformed or invalid configuration; carries the offending field path."""

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvariantError(ConfigError):
    """A named physical invariant of a parameter set is violated."""

    def __init__(self, invariant, message):
        self.invariant = invariant
        super().__init__(f"{invariant} violated: {message}")


class IllConditionedError(FttSimError):
    """Matrix inversion refused; carries a condition-number estimate."""

    def __init__(self, cond):
        self.cond = cond
        super().__init__(f"capacitance matrix is singular or ill-conditioned (cond ~ {cond:.3e})")


class NotHermitianError(FttSimError):
    """Operator expected to be Hermitian is not; carries max asymmetry."""

    def __init__(self, asymmetry):
        self.asymmetry = asymmetry
        super().__init__(f"matrix is not Hermitian (max |H - H^dag| = {asymmetry:.3e})")


class DimensionError(FttSimError):
    """Tensor-product dimension exceeds the configured cap."""


class ConvergenceError(FttSimError):
    """Basis-size convergence check failed."""


class StepSizeError(FttSimError):
    """Integration grid too coarse for the sampled Hamiltonian norm."""


class PhysicalityError(FttSimError):
    """Unphysical coherence-time combination (T2 > 2*T1)."""


class ResonanceError(FttSimError):
    """Dispersive formula evaluated at (or too close to) an exact resonance."""


class RootBracketError(FttSimError):
    """No sign change found on the search interval; carries a curve summary."""

    def __init__(self, message, summary=None):
        self.summary = summary
        super().__init__(message)


class TruncationError(FttSimError):
    """Fock truncation too small for the requested amplitude."""

    def __init__(self, n_given, n_suggested):
        self.n_suggested = n_suggested
        super().__init__(
            f"Fock truncation N={n_given} too small; use N >= {n_suggested}"
        )


class KerrRangeError(FttSimError):
    """Requested Kerr coefficient is outside the flux-scan range."""

    def __init__(self, target_mhz, k_min_mhz, k_max_mhz):
        self.scan_range_mhz = (k_min_mhz, k_max_mhz)
        super().__init__(
            f"Kerr target {target_mhz:g} MHz not reachable: flux scan covers "
            f"[{k_min_mhz:.3f}, {k_max_mhz:.3f}] MHz"
        )


class CalibrationWarning(UserWarning):
    """Gate calibration finished below the expected fidelity."""


class PositivityWarning(UserWarning):
    """Density matrix developed a negative eigenvalue beyond tolerance."""


class TruncationWarning(UserWarning):
    """State has non-negligible weight in the top Fock level."""
