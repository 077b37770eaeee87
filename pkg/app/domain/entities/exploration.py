import threading
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple

from app.domain.entities.distribution import Judgement, TransformLevel
from app.domain.entities.expr import Expr


@dataclass(frozen=True)
class ExploreItem:
    """Order budget `order` to spend on the variable block `block`"""

    order: int
    block: FrozenSet[str]

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order budget cannot be negative")
        if len(self.block) < self.order:
            raise ValueError("block is smaller than its order budget")

    def __repr__(self) -> str:
        return f"<ExploreItem(order={self.order}, block={{{', '.join(sorted(self.block))}}})>"


@dataclass(frozen=True)
class PotentialLeak:
    """A size-d observable set the type system could not certify"""

    observables: FrozenSet[str]
    level: TransformLevel
    judgement: Optional[Judgement] = None

    @property
    def key(self) -> Tuple[str, ...]:
        return tuple(sorted(self.observables))


class PotentialLeakSet:
    """Append-only, synchronised PLS accumulator"""

    def __init__(self):
        self._entries: Dict[FrozenSet[str], PotentialLeak] = {}
        self._lock = threading.Lock()

    def add(self, leak: PotentialLeak) -> bool:
        with self._lock:
            if leak.observables in self._entries:
                return False
            self._entries[leak.observables] = leak
            return True

    def __contains__(self, observables) -> bool:
        return frozenset(observables) in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[PotentialLeak]:
        return iter(self.sorted())

    def sorted(self) -> List[PotentialLeak]:
        with self._lock:
            entries = list(self._entries.values())
        return sorted(entries, key=lambda leak: leak.key)

    def sets(self) -> List[FrozenSet[str]]:
        return [leak.observables for leak in self.sorted()]


@dataclass
class AnalysisCache:
    """λ: algebraically simplified computations (only where they differ) and π: their dominators"""

    lam: Dict[str, Expr] = field(default_factory=dict)
    pi: Dict[str, FrozenSet[str]] = field(default_factory=dict)


@dataclass
class ExplorationStats:
    checks: int = 0
    extension_checks: int = 0
    replays: int = 0
    dom_successes: int = 0
    col_successes: int = 0
    leaky_shortcuts: int = 0

    def merge(self, other: "ExplorationStats") -> None:
        self.checks += other.checks
        self.extension_checks += other.extension_checks
        self.replays += other.replays
        self.dom_successes += other.dom_successes
        self.col_successes += other.col_successes
        self.leaky_shortcuts += other.leaky_shortcuts

    def to_dict(self) -> Dict[str, int]:
        return {
            "checks": self.checks,
            "extension_checks": self.extension_checks,
            "replays": self.replays,
            "dom_successes": self.dom_successes,
            "col_successes": self.col_successes,
            "leaky_shortcuts": self.leaky_shortcuts,
        }


@dataclass
class ExplorationResult:
    """Outcome of exploring all size-d observable sets of a program"""

    order: int
    x_check: Tuple[str, ...]
    pls: PotentialLeakSet
    stats: ExplorationStats
    covered: List[FrozenSet[str]] = field(default_factory=list)
    judgements: Dict[FrozenSet[str], Judgement] = field(default_factory=dict)

    @property
    def secure(self) -> bool:
        return len(self.pls) == 0
