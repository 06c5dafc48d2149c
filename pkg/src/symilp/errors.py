"""Exception types shared across the package."""


class SymilpError(Exception):
    """Base class for package errors."""


class ParseError(SymilpError):
    """Malformed instance, solution, or config input."""


class InvariantError(SymilpError):
    """A runtime invariant check failed; the CLI maps this to exit code 2."""


class BudgetError(SymilpError):
    """A node or time budget was exhausted; the CLI maps this to exit code 3."""
