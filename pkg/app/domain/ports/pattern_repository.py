from abc import ABC, abstractmethod
from typing import List

from app.domain.entities.pattern import PatternEntry


class PatternRepository(ABC):
    """Port interface for the pattern store.

    Stores resolved, normalised computation sets keyed by their canonical
    fingerprint. Implementations load eagerly and write through; lookups
    may run concurrently while inserts are serialised.
    """

    # ───────────────────────────────────────────────
    # STORE OPERATIONS
    # ───────────────────────────────────────────────

    @abstractmethod
    def add(self, entry: PatternEntry) -> PatternEntry:
        """Persist a new pattern.

        Args:
            entry: PatternEntry with a verdict established by counting or type inference.

        Returns:
            The stored entry with its ID populated.
        """
        raise NotImplementedError

    @abstractmethod
    def find_by_fingerprint(self, width: int, fingerprint: str) -> List[PatternEntry]:
        """All patterns of a word width sharing a fingerprint bucket."""
        raise NotImplementedError

    @abstractmethod
    def record_hit(self, entry: PatternEntry) -> None:
        """Count one more set served by `entry`."""
        raise NotImplementedError

    @abstractmethod
    def get_all(self) -> List[PatternEntry]:
        """Every stored pattern, in insertion order."""
        raise NotImplementedError

    @abstractmethod
    def count(self) -> int:
        raise NotImplementedError
