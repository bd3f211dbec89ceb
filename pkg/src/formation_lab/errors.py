class FormationError(Exception):
    pass


class DegenerateInput(FormationError, ValueError):
    pass


class IndexOutOfRange(FormationError, IndexError):
    pass


class DimensionMismatch(FormationError, ValueError):
    pass


class ConfigError(FormationError, ValueError):
    pass


class NonFinite(FormationError, ArithmeticError):
    """State or Jacobian left the finite / bounded region."""


class NotAnEquilibrium(FormationError, ValueError):
    pass


class InsufficientConvergence(UserWarning):
    """More than half of the Monte Carlo runs failed to settle."""
