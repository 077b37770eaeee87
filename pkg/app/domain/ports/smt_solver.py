from abc import ABC, abstractmethod


class SmtSolver(ABC):
    """Port interface for SMT-LIB 2 backends.

    Implementations receive a complete script (declarations, definitions
    and assertions) and answer with the solver's verdict.
    """

    @abstractmethod
    def check(self, script: str) -> str:
        """Decide satisfiability of `script`.

        Args:
            script: SMT-LIB 2 text without trailing commands.

        Returns:
            One of "sat", "unsat" or "unknown".
        """
        raise NotImplementedError

    @property
    @abstractmethod
    def name(self) -> str:
        """Short backend name used in reports."""
        raise NotImplementedError
