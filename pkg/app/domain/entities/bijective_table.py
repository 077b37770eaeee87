from typing import Sequence, Tuple

import numpy as np

from app.core.exceptions import TableError


class BijectiveTable:
    """Named univariate lookup table over κ-bit words, validated as a permutation"""

    def __init__(self, name: str, width: int, values: Sequence[int], source: str = "inline"):
        if not name:
            raise TableError("table name cannot be empty")

        size = 1 << width
        if len(values) != size:
            raise TableError(f"table {name} has {len(values)} entries, expected {size}")

        entries = tuple(int(v) for v in values)
        if any(v < 0 or v >= size for v in entries):
            raise TableError(f"table {name} has entries outside 0..{size - 1}")
        if len(set(entries)) != size:
            raise TableError(f"table {name} is not a permutation")

        # Atributes

        self.name = name
        self.width = width
        self.source = source
        self.entries: Tuple[int, ...] = entries
        self.values = np.asarray(entries, dtype=np.uint64)

    def __call__(self, value: int) -> int:
        return self.entries[value]

    def lookup(self, values: np.ndarray) -> np.ndarray:
        """Vectorised table application."""
        return self.values[np.asarray(values, dtype=np.uint64)]

    def __repr__(self) -> str:
        """Representation of the BijectiveTable entity"""
        return f"<BijectiveTable(name='{self.name}', width={self.width}, source='{self.source}')>"
