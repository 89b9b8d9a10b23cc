"""Exception types shared across qestlab."""


class ContractViolation(ValueError):
    """An input broke a documented precondition (non-unitary, non-Hermitian, ...)."""


class PreconditionError(ValueError):
    """A physically valid request that the model cannot serve, e.g. a shifted
    parameter outside the maximum-likelihood validity box."""


class NumericalFailure(RuntimeError):
    """A computed result broke an internal numerical contract."""
