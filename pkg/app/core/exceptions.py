"""
Exception hierarchy shared by every layer of maskcheck.
"""

from typing import Optional


class MaskcheckError(Exception):
    """Base class for all maskcheck failures."""


class ParseError(MaskcheckError):
    """Syntax or scoping error in a `.mask` source."""

    def __init__(self, message: str, line: int, column: int, source: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.source = source

    def diagnostic(self) -> str:
        """Render as `file:line:col: error: message`."""
        where = self.source or "<input>"
        return f"{where}:{self.line}:{self.column}: error: {self.message}"

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class ElaborationError(MaskcheckError):
    """Inlining, unrolling or SSA conversion failed."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column


class VariableError(MaskcheckError, KeyError):
    """Unknown variable, or a variable of the wrong class for the query."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown variable"


class TableError(MaskcheckError):
    """Malformed or non-bijective lookup table."""


class BudgetExceededError(MaskcheckError):
    """An enumeration, histogram or SMT formula would exceed its configured size."""

    def __init__(self, message: str, budget: str):
        super().__init__(message)
        self.budget = budget


class SolverError(MaskcheckError):
    """The SMT backend failed or produced an unreadable answer."""


class PatternStoreError(MaskcheckError):
    """Persistence failure in the pattern store."""
