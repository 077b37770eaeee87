from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

from app.domain.entities.expr import VarKind


class TransformKind(str, Enum):
    """Rewrites applied to computation sets"""
    ALG = "alg"
    DOM = "dom"
    COL = "col"


@dataclass(frozen=True)
class FreshVar:
    """Variable introduced by collapsing a set of variables into one"""

    name: str
    kind: VarKind
    origin: FrozenSet[str]

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TransformStep:
    """One applied rewrite.

    ALG steps carry the law name; DOM steps the replaced sub-expression and
    the random variable replacing it; COL steps the collapsed pair and the
    fresh variable.
    """

    kind: TransformKind
    law: Optional[str] = None
    replaced: Optional[str] = None
    replaced_id: Optional[int] = None
    random: Optional[str] = None
    fresh: Optional[FreshVar] = None
    pair: Optional[Tuple[str, str]] = None

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {"kind": self.kind.value}
        if self.law is not None:
            data["law"] = self.law
        if self.replaced is not None:
            data["replaced"] = self.replaced
        if self.random is not None:
            data["random"] = self.random
        if self.fresh is not None:
            data["fresh"] = self.fresh.name
            data["origin"] = sorted(self.fresh.origin)
        if self.pair is not None:
            data["pair"] = list(self.pair)
        return data

    def __str__(self) -> str:
        if self.kind == TransformKind.ALG:
            return f"alg[{self.law}]"
        if self.kind == TransformKind.DOM:
            return f"dom[{self.replaced} -> {self.random}]"
        return f"col[{{{', '.join(sorted(self.fresh.origin))}}} -> {self.fresh.name}]"


@dataclass
class TransformTrace:
    """Ordered record of the rewrites applied to a computation set"""

    steps: List[TransformStep] = field(default_factory=list)

    def append(self, step: TransformStep) -> None:
        self.steps.append(step)

    def extend(self, other: "TransformTrace") -> None:
        self.steps.extend(other.steps)

    def uses(self, kind: TransformKind) -> bool:
        return any(step.kind == kind for step in self.steps)

    def count(self, kind: TransformKind) -> int:
        return sum(1 for step in self.steps if step.kind == kind)

    def to_list(self) -> List[Dict[str, object]]:
        return [step.to_dict() for step in self.steps]

    def __len__(self) -> int:
        return len(self.steps)

    def __bool__(self) -> bool:
        return bool(self.steps)

    def __str__(self) -> str:
        return " ; ".join(str(step) for step in self.steps) or "identity"
