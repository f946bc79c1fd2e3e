"""Exception types shared across the package."""


class NcsError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(NcsError):
    """Array shapes are inconsistent with the declared (n, mL, mR) layout."""


class NotSymmetric(NcsError):
    """A weight/covariance matrix is asymmetric beyond the accepted tolerance."""


class NotPsd(NcsError):
    """A matrix that must be positive semi-definite is not."""

    def __init__(self, field: str, min_eigenvalue: float | None = None):
        self.field = field
        self.min_eigenvalue = min_eigenvalue
        msg = f"{field} is not positive semi-definite"
        if min_eigenvalue is not None:
            msg += f" (smallest eigenvalue {min_eigenvalue:.6e})"
        super().__init__(msg)


class ProbabilityOutOfRange(NcsError):
    """Packet-drop probability outside [0, 1]."""


class InfeasibleProblem(NcsError):
    """A backward step produced a control-curvature matrix that is not
    positive definite, so no unique optimal controller exists."""

    def __init__(self, k: int, which: str, p: float | None = None):
        self.k = k
        self.which = which  # "Upsilon" or "Lambda"
        self.p = p
        msg = f"{which} is not positive definite at step k={k}"
        if p is not None:
            msg += f" (drop probability p={p})"
        super().__init__(msg)


class NotStabilizable(NcsError):
    """The stationary coupled Riccati equations admit no valid solution."""


class AssumptionViolated(NcsError):
    """A precondition of the infinite-horizon solver fails (input weights not
    positive definite, or the state weight does not make the plant observable)."""


class SingularLambda(NcsError):
    """Local correction curvature cannot be inverted."""
