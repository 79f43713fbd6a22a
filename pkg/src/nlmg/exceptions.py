"""Exception types raised by the solvers."""


class NlmgError(Exception):
    """Base class for all package errors."""


class MeshError(NlmgError, ValueError):
    pass


class NoConvergence(NlmgError, RuntimeError):
    """An iteration hit its cap before meeting its tolerance.

    ``history`` carries whatever iterates were recorded (eigenvalues for SCF
    loops, residual norms for multigrid) so failures can be diagnosed.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class SingularSystem(NlmgError, ArithmeticError):
    pass


class NonSPDError(NlmgError, ValueError):
    """Matrix handed to a multigrid setup is not symmetric positive definite."""


class NonCoercive(NonSPDError):
    """Linearized Newton operator lost positive definiteness."""


class DegenerateSpace(NlmgError, ArithmeticError):
    """Augmented vector lies (numerically) inside the coarse space."""


class ZeroVector(NlmgError, ValueError):
    pass


class PreconditionError(NlmgError, ValueError):
    pass


class ConfigError(NlmgError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class MissingReference(NlmgError, ValueError):
    pass


class NonPositiveError(NlmgError, ValueError):
    pass
