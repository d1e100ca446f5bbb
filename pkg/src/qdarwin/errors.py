"""Exception types shared across the package."""


class QDarwinError(Exception):
    """Base class for all package errors."""


class DimensionError(QDarwinError, ValueError):
    """Operands have incompatible shapes or subsystem layouts."""


class InvalidStateError(QDarwinError, ValueError):
    """A state, operator or channel violates its defining invariants."""


class BudgetError(QDarwinError):
    """A requested model exceeds the dense dimension budget."""


class PostSelectionError(QDarwinError, ValueError):
    """Post-selection on an outcome that has (numerically) zero probability."""


class InvariantViolation(QDarwinError):
    """An internal consistency check on computed results failed."""
