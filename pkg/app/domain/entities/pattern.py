from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, Optional, Tuple

from app.domain.entities.distribution import DistType
from app.domain.entities.expr import Expr, Op


@dataclass(frozen=True)
class Assimilation:
    """Constant `constant` absorbed into `anchor ∘ constant`, renamed to `fresh`"""

    constant: int
    anchor: str
    op: Op
    fresh: str

    def __str__(self) -> str:
        return f"{self.anchor} {self.op.value} {self.constant} -> {self.fresh}"


@dataclass(frozen=True)
class NormalizedSet:
    """A computation set with every assimilable constant absorbed"""

    exprs: Tuple[Expr, ...]
    assimilated: Tuple[Assimilation, ...] = ()
    rewritten: bool = False

    def __len__(self) -> int:
        return len(self.exprs)

    def __str__(self) -> str:
        return "{" + ", ".join(str(e) for e in self.exprs) + "}"


@dataclass
class PatternEntry:
    """Resolved pattern: a normalised set, its verdict and how many sets it served"""

    fingerprint: str
    width: int
    exprs: Tuple[Expr, ...]
    verdict: DistType
    table_tags: Dict[str, str] = field(default_factory=dict)
    provenance: str = ""
    hits: int = 0
    id: Optional[int] = None
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    @property
    def rendered(self) -> str:
        return "{" + ", ".join(str(e) for e in self.exprs) + "}"

    def __repr__(self) -> str:
        """Representation of the PatternEntry entity"""
        return (
            f"<PatternEntry(id={self.id}, width={self.width}, verdict='{self.verdict.value}', "
            f"hits={self.hits}, set={self.rendered})>"
        )
