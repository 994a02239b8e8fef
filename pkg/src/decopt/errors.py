"""Exception types shared across the package."""


class DecoptError(Exception):
    """Base class for all package errors."""


class InvalidParametersError(DecoptError):
    """Graph generator called with parameters outside its domain."""


class DisconnectedGraphError(DecoptError):
    """Spectral machinery requires a connected graph (zero eigenvalue must be simple)."""


class ShapeMismatchError(DecoptError):
    """Matrix/vector dimensions do not conform."""


class InvalidSpecError(DecoptError):
    """Quantizer or experiment specification is malformed."""


class DualUnavailableError(DecoptError):
    """The objective has no closed-form conjugate gradient."""


class NoConvergenceError(DecoptError):
    """Reference solver exceeded its iteration cap."""


class MissingSigmaError(DecoptError):
    """Stochastic stepsize schedule requested without a variance bound."""


class MissingMError(DecoptError):
    """Finite-sum stepsize schedule requested on an objective without components."""


class NonFiniteError(DecoptError):
    """An iterate left the finite range; the stepsizes are divergent."""


class BudgetExhaustedError(DecoptError):
    """Run ended before reaching the target accuracy; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ParseError(DecoptError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class EmptyDatasetError(DecoptError):
    """Dataset file contained no samples."""


class AllDivergedError(DecoptError):
    """Every grid point of a tuning sweep diverged."""
