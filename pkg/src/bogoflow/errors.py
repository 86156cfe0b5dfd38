"""Exception and warning types shared across the package."""


class BogoflowError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgument(BogoflowError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class SingularMetric(BogoflowError):
    """Spatial metric is not invertible / positive definite at a sampled point."""


class QuadratureFailure(BogoflowError):
    """Adaptive quadrature did not converge within the order budget."""


class NegativeEigenvalue(BogoflowError):
    """Instantaneous operator has an eigenvalue below -tol (unrecoverable)."""


class ZeroMode(BogoflowError):
    """Instantaneous operator has an eigenvalue within tol of zero.

    Callers may retry after a small mass shift, see
    :func:`bogoflow.spectral.regularize_zero_mode`.
    """


class DegeneracyMismatch(BogoflowError):
    """Degenerate eigenspace dimensions changed between two time slices."""


class SymmetryViolation(BogoflowError):
    """Coupling matrices violate their anti-Hermitian/symmetric structure."""


class StepFailure(BogoflowError):
    """Adaptive step size underflowed during ODE integration."""


class IdentityDrift(BogoflowError):
    """Bogoliubov identity residual exceeded its monitoring cap mid-run."""


class DimensionMismatch(BogoflowError, ValueError):
    """Block matrices with incompatible mode counts were combined."""


class MissingPerturbedModes(BogoflowError):
    """First-order eigenpair data required by the mode-form coupling is absent."""


class NonDecayingProfile(BogoflowError):
    """Asymptotic Fourier coefficients requested for a non-decaying profile."""


class NonMonotonicGrid(BogoflowError):
    """Cosmological time grid failed to be strictly monotone."""


class WindowViolation(UserWarning):
    """Integration window lies outside the first-order validity range."""


class AsymptoteNotReached(UserWarning):
    """A scenario curve has not plateaued at the end of the integration range."""
