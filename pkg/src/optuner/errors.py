"""Exception hierarchy shared by every optuner module."""


class OptunerError(Exception):
    """Base class for all errors raised by optuner."""


class ParseError(OptunerError):
    """Malformed FPCore input, unsupported operator or bad precondition."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(OptunerError):
    """An operation is applied outside its mathematical domain.

    Raised for log of a non-positive value, division by an interval or value
    containing zero, tan across a pole, and arguments outside an
    implementation's valid input range.
    """


class CatalogError(OptunerError):
    """Invalid catalog contents or catalog file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NotFoundError(OptunerError, KeyError):
    """Lookup of an implementation, evaluable or report point failed."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InfeasibleError(OptunerError):
    """The implementation-selection problem has no feasible assignment."""


class BudgetExhausted(OptunerError):
    """A search ran out of its node or subdivision budget."""
