class InternalError(Exception):
    """Custom exception class."""
    pass

class DomainError(InternalError):
    """Argument outside the domain of a formula (modulus, neck size, radius, window)."""
    pass

class ConfigError(InternalError):
    """Run configuration failed validation."""
    pass

class IntegrationError(InternalError):
    """The ODE integrator stopped before reaching the end of the interval."""
    pass

class ProfileError(InternalError):
    """A tabulated profile violates one of its invariants."""
    pass

class SymmetryError(InternalError):
    """A grid field does not have the symmetries it is flagged with."""
    pass

class ImmersionError(InternalError):
    """The parametrization degenerates (EG - F^2 <= 0) at some grid point."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index

class SolvabilityError(InternalError):
    """Right-hand side is not orthogonal to the kernel of the limit operator."""
    pass

class LinearSolveError(InternalError):
    """Sparse factorization or solve failed."""
    pass

class ConvergenceError(InternalError):
    """Iteration diverged or ran out of steps."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []

class NoRootError(InternalError):
    """No sign change of the multiplier in the searched bracket."""

    def __init__(self, message, sweep=None):
        super().__init__(message)
        self.sweep = sweep if sweep is not None else []

class QuadratureError(InternalError):
    """Adaptive quadrature did not reach the requested tolerance."""
    pass
