"""Exception types shared across the package."""


class PointOutsideDomainError(ValueError):
    """A query point lies outside the closed unit square (beyond tolerance)."""


class UnstablePairError(ValueError):
    """Requested velocity/pressure pair is not inf-sup stable on this mesh."""


class NumericDataError(ArithmeticError):
    """Sampled data produced non-finite values (NaN or infinity)."""


class SingularSystemError(RuntimeError):
    """A linear system was structurally or numerically singular."""


class ConvergenceFailureError(RuntimeError):
    """An iterative solve did not reach the requested tolerance.

    Carries the residual history of the failed solve in ``residuals``.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class IncompatibleMeshError(ValueError):
    """Two meshes are neither identical nor members of one nested family."""


class InvalidStateError(RuntimeError):
    """An operation was invoked on data violating its preconditions."""
