"""Exception types raised across the package."""


class ErmStabError(Exception):
    """Base class for all package errors."""


class ValidationError(ErmStabError, ValueError):
    """An input violated a documented precondition."""


class InvalidExampleError(ValidationError, IndexError):
    """An example refers to an input point outside the hypothesis domain."""


class IndistinguishableHypothesesError(ValidationError):
    """Two hypotheses agree on every input point of positive probability."""


class EnumerationCapError(ErmStabError):
    """Exact enumeration would exceed the configured cap; use the Monte Carlo engine."""

    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(
            f"exact enumeration needs {size} states, above the cap of {cap}; "
            "too large, use the Monte Carlo engine"
        )


class UndefinedConditionalError(ErmStabError, ZeroDivisionError):
    """A conditional probability was requested given an event of probability zero."""
