from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from app.domain.entities.distribution import DistType

# Tuple indices are packed into uint64
MAX_INDEX_BITS = 64


class Histogram:
    """Joint value counts of m expressions over every random assignment.

    Stored sparsely as sorted tuple indices with their counts; the index of
    (c_0, ..., c_{m-1}) is Σ c_i · 2^(κ·i).
    """

    def __init__(self, width: int, arity: int, keys: np.ndarray, counts: np.ndarray):
        self.width = width
        self.arity = arity
        self.keys = np.asarray(keys, dtype=np.uint64)
        self.counts = np.asarray(counts, dtype=np.int64)

    @classmethod
    def from_dense(cls, width: int, arity: int, dense: np.ndarray) -> "Histogram":
        keys = np.flatnonzero(dense).astype(np.uint64)
        return cls(width, arity, keys, dense[keys.astype(np.int64)])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def index(self, values: Tuple[int, ...]) -> int:
        result = 0
        for i, value in enumerate(values):
            result |= int(value) << (self.width * i)
        return result

    def decode(self, index: int) -> Tuple[int, ...]:
        mask = (1 << self.width) - 1
        return tuple((int(index) >> (self.width * i)) & mask for i in range(self.arity))

    def count(self, values: Tuple[int, ...]) -> int:
        key = np.uint64(self.index(values))
        pos = int(np.searchsorted(self.keys, key))
        if pos < len(self.keys) and self.keys[pos] == key:
            return int(self.counts[pos])
        return 0

    def as_dict(self) -> Dict[Tuple[int, ...], int]:
        return {self.decode(int(k)): int(c) for k, c in zip(self.keys, self.counts)}

    def is_flat(self) -> bool:
        """True when every tuple of 𝕀^m occurs equally often."""
        support = 1 << (self.width * self.arity)
        return len(self.keys) == support and bool(np.all(self.counts == self.counts[0]))

    def first_difference(self, other: "Histogram") -> Optional[Tuple[Tuple[int, ...], int, int]]:
        """Smallest tuple whose counts differ, with both counts."""
        if self == other:
            return None
        keys = np.union1d(self.keys, other.keys)
        mine = self._counts_at(keys)
        theirs = other._counts_at(keys)
        pos = int(np.flatnonzero(mine != theirs)[0])
        return self.decode(int(keys[pos])), int(mine[pos]), int(theirs[pos])

    def _counts_at(self, keys: np.ndarray) -> np.ndarray:
        result = np.zeros(len(keys), dtype=np.int64)
        pos = np.searchsorted(self.keys, keys)
        inside = pos < len(self.keys)
        hit = np.zeros(len(keys), dtype=bool)
        hit[inside] = self.keys[pos[inside]] == keys[inside]
        result[hit] = self.counts[pos[hit]]
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return (
            self.width == other.width
            and self.arity == other.arity
            and np.array_equal(self.keys, other.keys)
            and np.array_equal(self.counts, other.counts)
        )

    def __repr__(self) -> str:
        return f"<Histogram(width={self.width}, arity={self.arity}, support={len(self.keys)}, total={self.total})>"


class CountingBackend(str, Enum):
    """How a potential leaky set was resolved"""
    ENUMERATION = "enumeration"
    PARALLEL = "parallel"
    SMT = "smt"
    PATTERN = "pattern"


@dataclass(frozen=True)
class LeakWitness:
    """Two valuations agreeing on public inputs whose joint counts differ at `values`"""

    public: Dict[str, int]
    private_reference: Dict[str, int]
    private: Dict[str, int]
    members: Tuple[str, ...]
    values: Tuple[int, ...]
    reference_count: int
    count: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "public": dict(self.public),
            "private_reference": dict(self.private_reference),
            "private": dict(self.private),
            "tuple": dict(zip(self.members, self.values)),
            "reference_count": self.reference_count,
            "count": self.count,
        }


@dataclass
class CountVerdict:
    """Exact outcome of model counting for one observable set"""

    dist_type: DistType
    backend: CountingBackend
    witness: Optional[LeakWitness] = None
    histograms: int = 0
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def leaky(self) -> bool:
        return self.dist_type == DistType.LEAKY

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {
            "type": self.dist_type.value,
            "backend": self.backend.value,
            "histograms": self.histograms,
        }
        if self.witness is not None:
            data["witness"] = self.witness.to_dict()
        return data
