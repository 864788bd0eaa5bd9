"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class CapabilityError(RuntimeError):
    """The operation cannot handle this input (precondition not met)."""


class CapacityError(RuntimeError):
    """A configured size cap was exceeded.

    ``level`` is the last level that was completed before the cap was hit,
    and ``partial`` optionally carries whatever was computed up to it.
    """

    def __init__(self, message, level=None, partial=None):
        super().__init__(message)
        self.level = level
        self.partial = partial


class CountOverflowError(OverflowError):
    """An exact vertex count does not fit the representable range."""
