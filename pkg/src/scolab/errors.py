"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class BudgetExceeded(MemoryError):
    """A dense computation would exceed the configured size budget.

    Callers should switch to the compressed or summary-based path.
    """


class EventPreconditionError(RuntimeError):
    """The bad-coordinate event ``T/2 <= |B| <= T`` does not hold."""


class FallbackRequired(RuntimeError):
    """The compressed simulator left its exactness regime.

    Raised when the iterate would need a projection or a good coordinate
    turned nonnegative. The dense engine must be used instead.
    """


class SpecError(ValueError):
    """An experiment specification is malformed or infeasible."""
