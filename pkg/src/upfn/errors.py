"""Exception hierarchy shared by all modules."""


class UpfnError(Exception):
    """Base class."""


class InvalidKernelError(UpfnError, ValueError):
    """Kernel evaluator produced non-finite values or violates its declared data."""


class StructureMismatchError(UpfnError, ValueError):
    """An operation needs kernel structure (product / derivatives) that is absent."""


class DomainError(UpfnError, ValueError):
    """Argument outside the domain where the quantity is defined."""


class CoverageError(UpfnError, ValueError):
    """A kernel support leaves the noise lattice."""


class CapacityError(UpfnError, MemoryError):
    """Requested lattice or grid exceeds the configured size cap."""


class MissingConstantError(UpfnError, LookupError):
    """An externally supplied constant (lambda table entry) is unavailable."""


class NotInClassError(UpfnError, ValueError):
    """Bandwidth is not a member of the required class (e.g. B(A))."""


class HypothesisError(UpfnError, ValueError):
    """A theorem hypothesis required by a scenario does not hold."""

    def __init__(self, hypothesis: str, detail: str = ""):
        self.hypothesis = hypothesis
        msg = hypothesis if not detail else f"{hypothesis}: {detail}"
        super().__init__(msg)


class InsufficientResolutionError(UpfnError, ValueError):
    """Too few usable scales to fit an entropy exponent."""
